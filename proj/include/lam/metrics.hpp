#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include "lam/field.hpp"
#include "lam/model.hpp"
#include "lam/scene.hpp"

namespace lam {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Modified Hausdorff distance: max of the two directed mean-min distances.
/// Throws MetricError on an empty side.
double mhd(std::span<const Cell> a, std::span<const Cell> b);

/// (lambda / (t2 - t1)) * sum_{t in [t1, t2)} |F(x_t) . (x_{t+1} - x_t)|.
/// Requires t2 > t1 and t2 < cells.size().
double model_nll(std::span<const Cell> cells, int t1, int t2, const VectorField& field,
                 double lambda);

struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open extents, x1 >= x0
};

double iou(const Box& a, const Box& b);

/// Axis-aligned bounding box of the source's 2-sigma ellipse, clipped to the
/// lattice.
Box source_box(const Source& s, const Lattice& lat);

inline Box truth_box(const std::array<double, 4>& b) { return Box{b[0], b[1], b[2], b[3]}; }

struct MatchResult {
  std::vector<int> gt_to_pred;  // per gt source, matched pred index or -1
  std::vector<double> gt_iou;   // IOU of that match (0 when unmatched)
  double accuracy = 0.0;        // matched gt / total gt
};

/// Greedy one-to-one matching by descending IOU; matches need IOU >= 0.5.
MatchResult source_localization(const std::vector<Source>& pred,
                                const std::vector<GroundTruth::TrueSource>& gt,
                                const Lattice& lat);

/// Matched-true-goal recall per agent, averaged; agents without true goals
/// are excluded. gt_to_pred comes from source_localization.
double relation_accuracy(const std::vector<std::vector<int>>& gt_goals,
                         const RelationMatrix& pred, std::span<const int> gt_to_pred);

/// The printed normalized-Hamming variant (can reward correct zeros).
double relation_hamming_literal(const std::vector<std::vector<int>>& gt_goals,
                                const RelationMatrix& pred, std::span<const int> gt_to_pred);

/// Agent counts as correct iff every true goal is matched to a predicted
/// source and the predicted goal set equals the mapped true set exactly.
double joint_sr_accuracy(const std::vector<std::vector<int>>& gt_goals,
                         const RelationMatrix& pred, std::span<const int> gt_to_pred);

struct PrPoint {
  double threshold = 0, precision = 0, recall = 0;
};

struct BehaviorEval {
  std::array<std::array<int, 3>, 3> confusion{};  // [truth][predicted]
  std::array<std::vector<PrPoint>, 3> pr;
  std::array<double, 3> ap{};
  double mean_ap = 0.0;  // over classes present in the truth
};

/// class_scores[i][c]: margin score of class c for agent i (higher = more
/// confident). Predicted class = argmax; PR per class by threshold sweep over
/// that class's column; AP by trapezoidal integration.
BehaviorEval behavior_scores(std::span<const Behavior> gt,
                             std::span<const std::array<double, 3>> class_scores);

struct EvalReport {
  std::vector<double> agent_mhd;
  std::vector<double> agent_nll;
  double mean_mhd = 0.0;
  double mean_nll = 0.0;
  double s_accuracy = 0.0;
  std::vector<double> source_iou;
  std::vector<int> gt_to_pred;
  double r_accuracy = 0.0;
  double joint_sr = 0.0;
  BehaviorEval behaviors;
  bool has_behaviors = false;
};

}  // namespace lam
