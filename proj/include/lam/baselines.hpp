#pragma once

#include <random>
#include <vector>

#include "lam/mcmc.hpp"

namespace lam {

struct GreedyParams {
  double tau = -0.1;  // goal-posterior sharpness; < 0 rewards approach
};

/// Bresenham rasterization, endpoints included.
std::vector<Cell> bresenham_line(Cell a, Cell b);

/// Straight segment from the last observed cell to the agent's selected goal
/// (lowest index when several), obstacles ignored, stay-padded to horizon.
Trajectory shortest_path_baseline(const Scene& scene, const ChainSnapshot& state, int agent);

/// Uniform choice over the 9 actions with non-walkable moves re-drawn.
Trajectory random_walk_baseline(const Scene& scene, const ChainSnapshot& state, int agent,
                                std::mt19937_64& rng);

/// Per-step predictive NLL of the random walk at `from`: ln(#legal actions).
double rw_step_nll(const ConstraintMap& cmap, Cell from);

/// Follows the summed attraction+repulsion field of all sources: each frame
/// take the walkable move best aligned with the field, stay on a zero field.
Trajectory physical_move_baseline(const Scene& scene, const ChainSnapshot& state, int agent,
                                  const FieldParams& field_params);

struct GreedyPrediction {
  Trajectory traj;
  std::vector<int> goal_per_frame;  // chosen source per simulated frame
};

/// Per frame pick j* = argmax_j exp(tau (|x_j - x_t| - |x_j - x_start|)),
/// ties to the lowest index, then descend j*'s cost-to-go one cell.
GreedyPrediction greedy_move_baseline(const Scene& scene, const GoalTables& tables, int agent,
                                      const GreedyParams& params);

}  // namespace lam
