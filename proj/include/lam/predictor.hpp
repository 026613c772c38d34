#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lam/mcmc.hpp"

namespace lam {

struct PredictionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PredictParams {
  ModelParams model;
  FieldParams field;
  double epsilon = 1e-3;
  int dwell = 10;           // stay frames inserted at each intermediate milestone
  int switch_stride = 3;    // candidate switch cells every k-th planned cell
  bool exhaustive_switch = false;  // consider every cell of the first leg instead
  int online_samples = 100;
  int relation_sweeps = 20;  // relation-only proposals per simulated frame
};

/// One enumerated (behavior, goal order) candidate with its joint score:
/// -lambda * path energy (per-leg fields) + behavior log prior.
struct ScoredHypothesis {
  Behavior z = Behavior::kSingle;
  std::vector<int> goal_order;
  int switch_frame = -1;  // change only: frame where the second leg starts
  double score = -std::numeric_limits<double>::infinity();
};

struct OfflinePrediction {
  int agent_id = 0;
  ScoredHypothesis best;
  std::vector<Cell> path;  // frames 0..horizon-1; starts with the observed prefix
  std::vector<ScoredHypothesis> hypotheses;  // every enumerated candidate
};

/// Best switch point for heading to A then B: candidates are every
/// switch_stride-th cell of the planned leg toward A past the prefix, plus
/// the prefix frame of maximal deviation from the A-geodesic.
struct ChangeHypothesis {
  int switch_frame = -1;
  double log_lik = -std::numeric_limits<double>::infinity();
  std::vector<Cell> path;  // prefix + both legs, unpadded
};

ChangeHypothesis score_change_hypothesis(const Scene& scene, const GoalTables& tables, int agent,
                                         int goal_a, int goal_b, const PredictParams& params);

/// Single selected goal: planner path, stay until horizon. Multiple goals:
/// argmax over permutations x {sequential, change(ordered pairs)}.
/// Throws PredictionError when every hypothesis scores -infinity.
OfflinePrediction predict_offline(const Scene& scene, const ChainSnapshot& state,
                                  const GoalTables& tables, int agent,
                                  const PredictParams& params);
std::vector<OfflinePrediction> predict_offline_all(const Scene& scene, const ChainSnapshot& state,
                                                   const PredictParams& params);

enum class StopReason { kOutOfScene = 0, kAllGoalsVisited = 1, kHorizon = 2 };
std::string to_string(StopReason r);

struct OnlinePrediction {
  int agent_id = 0;
  std::vector<Cell> path;  // frames 0..last simulated; starts with the prefix
  std::vector<std::vector<double>> goal_posterior;  // per simulated frame, per source
  StopReason stop = StopReason::kHorizon;
};

/// Frame-by-frame rollout toward the closest remaining goal: 9-action
/// candidates weighted by exp(-lambda (|F| * step + cost-to-go)), mean of
/// online_samples draws snapped to the nearest walkable candidate. The
/// relation row is re-estimated each frame by relation-only proposals
/// (change-of-intent hypotheses excluded online).
OnlinePrediction predict_online(const Scene& scene, const ChainSnapshot& state,
                                const GoalTables& tables, int agent, const PredictParams& params,
                                std::uint64_t seed);
std::vector<OnlinePrediction> predict_online_all(const Scene& scene, const ChainSnapshot& state,
                                                 const PredictParams& params, std::uint64_t seed);

}  // namespace lam
