#include "lam/baselines.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace lam {
namespace {

void pad_to(std::vector<Cell>& path, int horizon) {
  while (static_cast<int>(path.size()) < horizon) path.push_back(path.back());
  if (static_cast<int>(path.size()) > horizon) path.resize(static_cast<size_t>(horizon));
}

Trajectory prefix_copy(const Trajectory& traj) {
  Trajectory out = traj;
  out.cells.assign(traj.observed().begin(), traj.observed().end());
  return out;
}

}  // namespace

std::vector<Cell> bresenham_line(Cell a, Cell b) {
  std::vector<Cell> out;
  int x0 = a.x, y0 = a.y;
  const int dx = std::abs(b.x - x0), sx = x0 < b.x ? 1 : -1;
  const int dy = -std::abs(b.y - y0), sy = y0 < b.y ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    out.push_back(Cell{x0, y0});
    if (x0 == b.x && y0 == b.y) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
  return out;
}

Trajectory shortest_path_baseline(const Scene& scene, const ChainSnapshot& state, int agent) {
  const Trajectory& traj = scene.agents[static_cast<size_t>(agent)].traj;
  std::vector<int> goals = state.rel.goals_of(agent);
  if (goals.empty()) throw InputError("agent has no selected goal");
  Cell mu = state.sources[static_cast<size_t>(goals[0])].mu;
  Trajectory out = prefix_copy(traj);
  std::vector<Cell> line = bresenham_line(out.cells.back(), mu);
  for (size_t i = 1; i < line.size(); ++i) out.cells.push_back(line[i]);
  pad_to(out.cells, traj.horizon);
  return out;
}

Trajectory random_walk_baseline(const Scene& scene, const ChainSnapshot& state, int agent,
                                std::mt19937_64& rng) {
  const Trajectory& traj = scene.agents[static_cast<size_t>(agent)].traj;
  const Lattice& lat = state.cmap.lattice();
  std::uniform_int_distribution<int> action(0, 8);
  Trajectory out = prefix_copy(traj);
  while (static_cast<int>(out.cells.size()) < traj.horizon) {
    Cell cur = out.cells.back();
    for (;;) {
      int a = action(rng);
      Cell cand{cur.x + a % 3 - 1, cur.y + a / 3 - 1};
      if (cand == cur) {
        out.cells.push_back(cand);  // staying put is always legal
        break;
      }
      if (lat.contains(cand) && state.cmap.walkable(cand)) {
        out.cells.push_back(cand);
        break;
      }
    }
  }
  return out;
}

double rw_step_nll(const ConstraintMap& cmap, Cell from) {
  return std::log(static_cast<double>(walkable_actions(cmap, from).size()));
}

Trajectory physical_move_baseline(const Scene& scene, const ChainSnapshot& state, int agent,
                                  const FieldParams& field_params) {
  const Trajectory& traj = scene.agents[static_cast<size_t>(agent)].traj;
  VectorField field = superposed_field(state.cmap, state.sources, field_params);
  Trajectory out = prefix_copy(traj);
  while (static_cast<int>(out.cells.size()) < traj.horizon) {
    Cell cur = out.cells.back();
    Vec2 f = field.at(cur);
    Cell next = cur;
    if (f.x != 0.0 || f.y != 0.0) {
      double best = -std::numeric_limits<double>::infinity();
      for (Cell nb : walkable_neighbors(state.cmap, cur)) {
        double dx = nb.x - cur.x, dy = nb.y - cur.y;
        double align = (f.x * dx + f.y * dy) / std::sqrt(dx * dx + dy * dy);
        if (align > best) {
          best = align;
          next = nb;
        }
      }
    }
    out.cells.push_back(next);
  }
  return out;
}

GreedyPrediction greedy_move_baseline(const Scene& scene, const GoalTables& tables, int agent,
                                      const GreedyParams& params) {
  if (params.tau == 0.0) throw std::invalid_argument("tau must be nonzero");
  const Trajectory& traj = scene.agents[static_cast<size_t>(agent)].traj;
  Cell start = traj.cells.front();
  GreedyPrediction out;
  out.traj = prefix_copy(traj);
  while (static_cast<int>(out.traj.cells.size()) < traj.horizon) {
    Cell cur = out.traj.cells.back();
    int pick = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < tables.count(); ++j) {
      Cell mu = tables.source(j).mu;
      double w = std::exp(params.tau * (euclid(mu, cur) - euclid(mu, start)));
      if (w > best) {
        best = w;
        pick = j;
      }
    }
    out.goal_per_frame.push_back(pick);
    Cell next = greedy_step(tables.map(), tables.field(pick), tables.togo(pick), cur,
                            tables.epsilon());
    out.traj.cells.push_back(next);
  }
  return out;
}

}  // namespace lam
