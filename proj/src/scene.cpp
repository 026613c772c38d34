#include "lam/scene.hpp"

#include <set>
#include <stdexcept>

namespace lam {

const char* to_string(Behavior b) {
  switch (b) {
    case Behavior::kSingle: return "single";
    case Behavior::kSequential: return "sequential";
    case Behavior::kChange: return "change";
  }
  throw std::logic_error("unknown behavior");
}

Behavior behavior_from_string(const std::string& s) {
  if (s == "single") return Behavior::kSingle;
  if (s == "sequential") return Behavior::kSequential;
  if (s == "change") return Behavior::kChange;
  throw std::invalid_argument("unknown behavior label: " + s);
}

std::vector<std::string> validate_scene(const Scene& scene) {
  std::vector<std::string> out;
  const Lattice& lat = scene.lattice();

  for (size_t j = 0; j < scene.sources.size(); ++j) {
    const Source& s = scene.sources[j];
    if (!lat.contains(s.mu)) {
      out.push_back("source " + std::to_string(j) + " outside lattice");
      continue;
    }
    if (!scene.constraints.walkable(s.mu))
      out.push_back("warning: source " + std::to_string(j) + " on non-walkable cell");
    if (s.sxx <= 0 || s.syy <= 0 || s.sxx * s.syy - s.sxy * s.sxy <= 0)
      out.push_back("source " + std::to_string(j) + " covariance not positive definite");
  }

  std::set<int> ids;
  for (size_t i = 0; i < scene.agents.size(); ++i) {
    const Agent& a = scene.agents[i];
    std::string who = "agent " + std::to_string(a.id);
    if (!ids.insert(a.id).second) out.push_back(who + ": duplicate id");
    const Trajectory& t = a.traj;
    if (t.cells.empty()) {
      out.push_back(who + ": empty trajectory");
      continue;
    }
    if (t.t0 <= 0 || t.t0 > static_cast<int>(t.cells.size()))
      out.push_back(who + ": observed split t0 outside (0, len]");
    if (t.horizon < static_cast<int>(t.cells.size()))
      out.push_back(who + ": horizon shorter than recorded frames");
    for (size_t k = 0; k < t.cells.size(); ++k) {
      if (!lat.contains(t.cells[k])) {
        out.push_back(who + ": frame " + std::to_string(k) + " outside lattice");
        break;
      }
      if (k > 0 && chebyshev(t.cells[k - 1], t.cells[k]) > 1) {
        out.push_back(who + ": frame " + std::to_string(k) + " jumps more than one cell");
        break;
      }
    }
  }

  if (scene.features) {
    const auto& f = *scene.features;
    if (static_cast<int>(f.color.size()) != lat.size() ||
        static_cast<int>(f.ground.size()) != lat.size())
      out.push_back("feature channel size does not match lattice");
  }

  if (scene.truth) {
    const auto& gt = *scene.truth;
    size_t m = scene.agents.size();
    if (gt.goal_orders.size() != m || gt.behaviors.size() != m || gt.switch_frames.size() != m)
      out.push_back("ground truth agent arrays do not match agent count");
    for (size_t i = 0; i < gt.goal_orders.size(); ++i)
      for (int j : gt.goal_orders[i])
        if (j < 0 || j >= static_cast<int>(gt.sources.size()))
          out.push_back("ground truth goal index out of range for agent " + std::to_string(i));
  }

  return out;
}

void require_valid(const Scene& scene) {
  for (const auto& v : validate_scene(scene))
    if (v.rfind("warning:", 0) != 0) throw std::invalid_argument("invalid scene: " + v);
}

}  // namespace lam
