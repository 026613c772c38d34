#pragma once

#include <limits>
#include <span>
#include <vector>

#include "lam/field.hpp"
#include "lam/grid.hpp"

namespace lam {

struct PathCostParams {
  double lambda = 0.5;   // energy-to-log-likelihood scale
  double epsilon = 1e-3; // per-step length regularizer used for routing
};

/// Result of a least-action search. `energy` carries the field term
/// sum |F(x) . dx| only; `cost` adds the epsilon * step-length regularizer
/// that routing minimizes.
struct PlannedPath {
  std::vector<Cell> cells;  // start .. goal inclusive; empty when unreachable
  double energy = std::numeric_limits<double>::infinity();
  double cost = std::numeric_limits<double>::infinity();
  bool reachable = false;

  int steps() const { return cells.empty() ? 0 : static_cast<int>(cells.size()) - 1; }
};

/// Minimum-cost 8-connected path from start to goal. The field is sampled at
/// each step's tail cell. Interior cells must be walkable; start and goal are
/// enterable regardless of their label. Ties break toward fewer steps, then
/// by row-major order.
PlannedPath dijkstra_path(const ConstraintMap& map, const VectorField& field, Cell start,
                          Cell goal, double epsilon);

/// Ordered multi-goal chaining: leg k runs from the previous endpoint to
/// goals[k] under leg_fields[k]. Legs after an unreachable one are returned
/// unreachable as well.
std::vector<PlannedPath> multi_goal_path(const ConstraintMap& map,
                                         std::span<const VectorField* const> leg_fields,
                                         Cell start, std::span<const Cell> goals,
                                         double epsilon);

/// Optimal forward cost from every cell to `goal` (one reverse sweep).
/// cost[] is the routing objective (with epsilon), energy[] the field term of
/// the same optimal path; unreachable cells hold +infinity.
struct CostToGo {
  Lattice lattice;
  std::vector<double> cost;
  std::vector<double> energy;

  double cost_at(Cell c) const { return cost[static_cast<size_t>(lattice.index(c))]; }
  double energy_at(Cell c) const { return energy[static_cast<size_t>(lattice.index(c))]; }
};

CostToGo cost_to_go_table(const ConstraintMap& map, const VectorField& field, Cell goal,
                          double epsilon);

/// One step of greedy descent on a cost-to-go table: the walkable neighbor
/// minimizing edge cost plus remaining cost, ties by row-major order. Returns
/// `from` when already at the table's goal or when every neighbor is
/// unreachable.
Cell greedy_step(const ConstraintMap& map, const VectorField& field, const CostToGo& togo,
                 Cell from, double epsilon);

/// Field-energy sum |F(x_t) . (x_{t+1} - x_t)| over a recorded cell sequence.
double path_energy(std::span<const Cell> cells, const VectorField& field);

/// cum[t] = energy of the first t steps; size = cells.size(), cum[0] = 0.
std::vector<double> path_energy_prefix(std::span<const Cell> cells, const VectorField& field);

inline double trajectory_log_likelihood(double path_energy_total, const PathCostParams& params) {
  return -params.lambda * path_energy_total;
}

}  // namespace lam
