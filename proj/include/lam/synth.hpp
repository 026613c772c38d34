#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "lam/field.hpp"
#include "lam/scene.hpp"

namespace lam {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SynthConfig {
  int width = 44;
  int height = 44;
  int n_sources = 3;
  int n_agents = 50;
  double obstacle_ratio = 0.15;  // target fraction of non-walkable cells
  double ratio_tolerance = 0.02;
  double jitter = 0.2;  // per-step probability of a lateral deviation
  double speed = 1.0;   // per-frame probability of moving (< 1 slows agents)
  double p_single = 1.0;
  double p_sequential = 0.0;
  double p_change = 0.0;
  int dwell = 10;               // stay frames at each visited milestone
  int min_source_separation = 5;
  int source_margin = 1;  // keep sources this far from the border spawns
  double observed_fraction = 0.5;
  bool features = false;  // fill the two-cluster color channel
  std::uint64_t seed = 0;
  double epsilon = 1e-3;
  FieldParams field;
};

/// Rectangles are dropped until the obstacle ratio is within tolerance while
/// the walkable region stays 8-connected; sources land on walkable cells at
/// least source_margin from the border, pairwise >= min_source_separation
/// apart, truth boxes at mu +- 2 cells.
/// Throws GenerationError when 100 attempts cannot reach the target.
Scene generate_layout(const SynthConfig& config, std::mt19937_64& rng);

/// Samples one behavior and goal set per agent from the configured mix and
/// walks planner geodesics with lateral jitter; fills agents and the
/// ground-truth relations/behaviors/switch frames. Unreachable spawn/goal
/// pairs are re-drawn (<= 20 tries) before GenerationError.
void simulate_agents(Scene& scene, const SynthConfig& config, std::mt19937_64& rng);

/// Sets every agent's observed prefix to ceil(fraction * length) frames.
void truncate_observations(Scene& scene, double fraction);

/// generate_layout + simulate_agents + truncate_observations from one seed.
Scene synth_scene(const SynthConfig& config);

/// Local traffic signatures around a cell for the functional-clustering
/// suite: queue = stop-and-go single file toward mu, dwell = long stationary
/// stays beside mu, exit = fast straight dispersal out of mu.
enum class Archetype { kQueue = 0, kDwell = 1, kExit = 2 };

std::vector<Trajectory> archetype_trajectories(const ConstraintMap& cmap, Cell mu,
                                               Archetype kind, int n_agents,
                                               std::uint64_t seed);

}  // namespace lam
