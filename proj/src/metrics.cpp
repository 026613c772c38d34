#include "lam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace lam {
namespace {

double directed_mean_min(std::span<const Cell> a, std::span<const Cell> b) {
  double total = 0.0;
  for (Cell p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (Cell q : b) best = std::min(best, euclid(p, q));
    total += best;
  }
  return total / static_cast<double>(a.size());
}

}  // namespace

double mhd(std::span<const Cell> a, std::span<const Cell> b) {
  if (a.empty() || b.empty()) throw MetricError("mhd needs two non-empty point sets");
  return std::max(directed_mean_min(a, b), directed_mean_min(b, a));
}

double model_nll(std::span<const Cell> cells, int t1, int t2, const VectorField& field,
                 double lambda) {
  if (t1 < 0 || t2 <= t1 || t2 >= static_cast<int>(cells.size()))
    throw MetricError("nll window must satisfy 0 <= t1 < t2 < length");
  double total = 0.0;
  for (int t = t1; t < t2; ++t) {
    Vec2 f = field.at(cells[static_cast<size_t>(t)]);
    double dx = cells[static_cast<size_t>(t) + 1].x - cells[static_cast<size_t>(t)].x;
    double dy = cells[static_cast<size_t>(t) + 1].y - cells[static_cast<size_t>(t)].y;
    total += std::abs(f.x * dx + f.y * dy);
  }
  return lambda * total / static_cast<double>(t2 - t1);
}

double iou(const Box& a, const Box& b) {
  double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  double inter = std::max(0.0, iw) * std::max(0.0, ih);
  double area_a = (a.x1 - a.x0) * (a.y1 - a.y0);
  double area_b = (b.x1 - b.x0) * (b.y1 - b.y0);
  double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Box source_box(const Source& s, const Lattice& lat) {
  double rx = 2.0 * std::sqrt(std::max(0.0, s.sxx));
  double ry = 2.0 * std::sqrt(std::max(0.0, s.syy));
  Box b{s.mu.x - rx, s.mu.y - ry, s.mu.x + rx, s.mu.y + ry};
  b.x0 = std::clamp(b.x0, 0.0, lat.width() - 1.0);
  b.x1 = std::clamp(b.x1, 0.0, lat.width() - 1.0);
  b.y0 = std::clamp(b.y0, 0.0, lat.height() - 1.0);
  b.y1 = std::clamp(b.y1, 0.0, lat.height() - 1.0);
  return b;
}

MatchResult source_localization(const std::vector<Source>& pred,
                                const std::vector<GroundTruth::TrueSource>& gt,
                                const Lattice& lat) {
  MatchResult out;
  out.gt_to_pred.assign(gt.size(), -1);
  out.gt_iou.assign(gt.size(), 0.0);
  if (gt.empty()) return out;

  struct Pair {
    double v;
    int g, p;
  };
  std::vector<Pair> pairs;
  for (size_t g = 0; g < gt.size(); ++g)
    for (size_t p = 0; p < pred.size(); ++p) {
      double v = iou(truth_box(gt[g].box), source_box(pred[p], lat));
      if (v >= 0.5) pairs.push_back(Pair{v, static_cast<int>(g), static_cast<int>(p)});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.v != b.v) return a.v > b.v;
    if (a.g != b.g) return a.g < b.g;
    return a.p < b.p;
  });
  std::vector<char> used(pred.size(), 0);
  int matched = 0;
  for (const Pair& pr : pairs) {
    if (out.gt_to_pred[static_cast<size_t>(pr.g)] >= 0 || used[static_cast<size_t>(pr.p)])
      continue;
    out.gt_to_pred[static_cast<size_t>(pr.g)] = pr.p;
    out.gt_iou[static_cast<size_t>(pr.g)] = pr.v;
    used[static_cast<size_t>(pr.p)] = 1;
    ++matched;
  }
  out.accuracy = static_cast<double>(matched) / static_cast<double>(gt.size());
  return out;
}

double relation_accuracy(const std::vector<std::vector<int>>& gt_goals,
                         const RelationMatrix& pred, std::span<const int> gt_to_pred) {
  double total = 0.0;
  int counted = 0;
  for (size_t i = 0; i < gt_goals.size(); ++i) {
    std::set<int> goals(gt_goals[i].begin(), gt_goals[i].end());
    if (goals.empty()) continue;
    int hit = 0;
    for (int g : goals) {
      int p = gt_to_pred[static_cast<size_t>(g)];
      if (p >= 0 && pred.at(static_cast<int>(i), p)) ++hit;
    }
    total += static_cast<double>(hit) / static_cast<double>(goals.size());
    ++counted;
  }
  return counted > 0 ? total / counted : 0.0;
}

double relation_hamming_literal(const std::vector<std::vector<int>>& gt_goals,
                                const RelationMatrix& pred, std::span<const int> gt_to_pred) {
  if (gt_goals.empty() || gt_to_pred.empty()) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < gt_goals.size(); ++i) {
    std::set<int> goals(gt_goals[i].begin(), gt_goals[i].end());
    int match = 0;
    for (size_t g = 0; g < gt_to_pred.size(); ++g) {
      bool want = goals.count(static_cast<int>(g)) > 0;
      int p = gt_to_pred[g];
      bool got = p >= 0 && pred.at(static_cast<int>(i), p);
      if (want == got) ++match;
    }
    total += static_cast<double>(match) / static_cast<double>(gt_to_pred.size());
  }
  return total / static_cast<double>(gt_goals.size());
}

double joint_sr_accuracy(const std::vector<std::vector<int>>& gt_goals,
                         const RelationMatrix& pred, std::span<const int> gt_to_pred) {
  if (gt_goals.empty()) return 0.0;
  int correct = 0;
  for (size_t i = 0; i < gt_goals.size(); ++i) {
    std::set<int> goals(gt_goals[i].begin(), gt_goals[i].end());
    std::set<int> mapped;
    bool all_matched = true;
    for (int g : goals) {
      int p = gt_to_pred[static_cast<size_t>(g)];
      if (p < 0) {
        all_matched = false;
        break;
      }
      mapped.insert(p);
    }
    if (!all_matched) continue;
    std::set<int> row;
    for (int j = 0; j < pred.n_sources(); ++j)
      if (pred.at(static_cast<int>(i), j)) row.insert(j);
    if (row == mapped) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(gt_goals.size());
}

BehaviorEval behavior_scores(std::span<const Behavior> gt,
                             std::span<const std::array<double, 3>> class_scores) {
  if (gt.size() != class_scores.size())
    throw MetricError("one score triple per ground-truth label required");
  BehaviorEval out;
  const int n = static_cast<int>(gt.size());
  for (int i = 0; i < n; ++i) {
    int pick = 0;
    for (int c = 1; c < 3; ++c)
      if (class_scores[static_cast<size_t>(i)][static_cast<size_t>(c)] >
          class_scores[static_cast<size_t>(i)][static_cast<size_t>(pick)])
        pick = c;
    out.confusion[static_cast<size_t>(gt[static_cast<size_t>(i)])][static_cast<size_t>(pick)]++;
  }

  int present = 0;
  double ap_sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    int positives = 0;
    for (int i = 0; i < n; ++i)
      if (static_cast<int>(gt[static_cast<size_t>(i)]) == c) ++positives;
    std::vector<double> thresholds;
    for (int i = 0; i < n; ++i)
      thresholds.push_back(class_scores[static_cast<size_t>(i)][static_cast<size_t>(c)]);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    double prev_r = 0.0, prev_p = 1.0, ap = 0.0;
    for (double th : thresholds) {
      int tp = 0, fp = 0;
      for (int i = 0; i < n; ++i) {
        if (class_scores[static_cast<size_t>(i)][static_cast<size_t>(c)] < th) continue;
        if (static_cast<int>(gt[static_cast<size_t>(i)]) == c)
          ++tp;
        else
          ++fp;
      }
      double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
      double recall = positives > 0 ? static_cast<double>(tp) / positives : 0.0;
      out.pr[static_cast<size_t>(c)].push_back(PrPoint{th, precision, recall});
      ap += (recall - prev_r) * (precision + prev_p) / 2.0;
      prev_r = recall;
      prev_p = precision;
    }
    if (positives > 0) {
      out.ap[static_cast<size_t>(c)] = ap;
      ap_sum += ap;
      ++present;
    }
  }
  out.mean_ap = present > 0 ? ap_sum / present : 0.0;
  return out;
}

}  // namespace lam
