#pragma once

#include <string>
#include <vector>

#include "lam/clustering.hpp"
#include "lam/mcmc.hpp"
#include "lam/metrics.hpp"
#include "lam/predictor.hpp"

namespace lam {

// Inference/prediction documents follow the scene-document conventions:
// JSON, mandatory format/version tag, canonical two-space layout, RLE
// constraint rows.

inline constexpr const char* kStateFormatTag = "lam-state";
inline constexpr int kStateFormatVersion = 1;
inline constexpr const char* kPredictionsFormatTag = "lam-predictions";
inline constexpr int kPredictionsFormatVersion = 1;

/// Snapshot of an inferred state, optionally with chain diagnostics
/// (trace, proposal stats, worst audit drift).
std::string serialize_state(const ChainSnapshot& snap, const McmcResult* diagnostics = nullptr);
ChainSnapshot parse_state(const std::string& text);
void save_state(const ChainSnapshot& snap, const std::string& path,
                const McmcResult* diagnostics = nullptr);
ChainSnapshot load_state(const std::string& path);

/// One agent's prediction, whichever mode produced it. Unused sections stay
/// empty: hypotheses (offline), goal_posterior + stop_reason (online),
/// goal_per_frame (greedy baseline).
struct AgentPrediction {
  int agent_id = 0;
  std::vector<Cell> path;  // frames 0..end, observed prefix included
  ScoredHypothesis best;
  std::vector<ScoredHypothesis> hypotheses;
  std::vector<std::vector<double>> goal_posterior;
  std::vector<int> goal_per_frame;
  std::string stop_reason;
};

struct PredictionDoc {
  std::string mode;  // offline | online | sp | rw | pm | gm
  std::vector<AgentPrediction> agents;
};

std::string serialize_predictions(const PredictionDoc& doc);
PredictionDoc parse_predictions(const std::string& text);
void save_predictions(const PredictionDoc& doc, const std::string& path);
PredictionDoc load_predictions(const std::string& path);

std::string serialize_eval_report(const EvalReport& report);

/// Flat CSV for sweep aggregation.
std::string eval_summary_header();
std::string eval_summary_row(const EvalReport& report);

std::string serialize_clusters(const ClusterResult& result);

}  // namespace lam
