#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lam/grid.hpp"

namespace lam {

/// Functional source: attraction center mu with a spatial covariance used
/// only for localization extents (detection boxes), not for the force field.
struct Source {
  Cell mu;
  double sxx = 1.0;
  double sxy = 0.0;
  double syy = 1.0;
};

/// Per-frame cell sequence. cells[t] is the position at frame t; consecutive
/// cells are identical or 8-neighbors (speed <= 1 cell/frame).
/// The first t0 frames are observed; anything beyond is ground-truth future
/// (synthetic scenes) and must not be read by inference.
struct Trajectory {
  std::vector<Cell> cells;
  int t0 = 0;       // number of observed frames, 0 < t0 <= horizon
  int horizon = 0;  // T; cells.size() <= horizon is allowed (prediction fills the rest)

  std::span<const Cell> observed() const {
    return std::span<const Cell>(cells.data(), static_cast<size_t>(t0));
  }
  Cell start() const { return cells.front(); }
  Cell last_observed() const { return cells[static_cast<size_t>(t0) - 1]; }
};

struct Agent {
  int id = 0;
  Trajectory traj;
};

enum class Behavior { kSingle, kSequential, kChange };

const char* to_string(Behavior b);
Behavior behavior_from_string(const std::string& s);

/// Optional per-cell appearance channel: 3 color components plus a ground flag.
struct FeatureChannel {
  std::vector<std::array<float, 3>> color;  // size = lattice size
  std::vector<std::uint8_t> ground;         // 0/1, size = lattice size
};

/// Ground truth for synthetic scenes.
struct GroundTruth {
  struct TrueSource {
    Cell mu;
    std::array<double, 4> box{};  // [x0, y0, x1, y1], continuous extents
  };
  std::vector<TrueSource> sources;
  std::vector<std::vector<int>> goal_orders;  // per agent, visit order of source indices
  std::vector<Behavior> behaviors;            // per agent
  std::vector<int> switch_frames;             // per agent, -1 when no switch
};

struct Scene {
  ConstraintMap constraints;
  std::vector<Source> sources;
  std::vector<Agent> agents;
  std::optional<FeatureChannel> features;
  std::optional<GroundTruth> truth;

  const Lattice& lattice() const { return constraints.lattice(); }
};

/// Structural diagnostics. Returns human-readable violations; empty means valid.
/// Sources on non-walkable cells are reported as warnings prefixed "warning:".
std::vector<std::string> validate_scene(const Scene& scene);

/// Throws std::invalid_argument when validate_scene reports a non-warning entry.
void require_valid(const Scene& scene);

}  // namespace lam
