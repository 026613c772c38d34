#include "lam/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace lam {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int local_index(int side, int u, int v) { return v * side + u; }

double sq_dist(const FunctionalDescriptor& a, const FunctionalDescriptor& b) {
  double s = 0.0;
  for (int i = 0; i < kDescriptorDim; ++i) {
    double d = a[static_cast<size_t>(i)] - b[static_cast<size_t>(i)];
    s += d * d;
  }
  return s;
}

// Nearest centroid over the 8 dihedral alignments.
struct Alignment {
  int label = 0;
  int op = 0;
  double dist = kInf;
};

Alignment align(const FunctionalDescriptor& d, std::span<const FunctionalDescriptor> centroids) {
  Alignment best;
  for (int op = 0; op < 8; ++op) {
    FunctionalDescriptor t = apply_dihedral(d, op);
    for (size_t c = 0; c < centroids.size(); ++c) {
      double dist = sq_dist(t, centroids[c]);
      if (dist < best.dist) {
        best.dist = dist;
        best.label = static_cast<int>(c);
        best.op = op;
      }
    }
  }
  return best;
}

}  // namespace

FeatureMaps build_feature_maps(const Scene& scene, const RelationMatrix& rel, int source_index,
                               int w) {
  if (source_index < 0 || source_index >= static_cast<int>(scene.sources.size()))
    throw InputError("source index out of range");
  if (w < 1) throw InputError("window half-width must be positive");
  FeatureMaps maps;
  maps.w = w;
  const int side = maps.side();
  maps.density.assign(static_cast<size_t>(side) * side, 0.0);
  maps.activeness.assign(static_cast<size_t>(side) * side, 0.0);
  maps.entropy.assign(static_cast<size_t>(side) * side, 0.0);

  Cell mu = scene.sources[static_cast<size_t>(source_index)].mu;
  std::vector<double> count(static_cast<size_t>(side) * side, 0.0);
  std::vector<double> speed_sum(static_cast<size_t>(side) * side, 0.0);
  std::vector<std::array<double, 8>> dirs(static_cast<size_t>(side) * side);
  for (auto& h : dirs) h.fill(0.0);

  double total = 0.0;
  for (size_t i = 0; i < scene.agents.size(); ++i) {
    if (rel.n_agents() <= static_cast<int>(i) || !rel.at(static_cast<int>(i), source_index))
      continue;
    const std::vector<Cell>& cells = scene.agents[i].traj.cells;
    const int T = static_cast<int>(cells.size());
    for (int t = 0; t < T; ++t) {
      Cell c = cells[static_cast<size_t>(t)];
      int u = c.x - mu.x + w, v = c.y - mu.y + w;
      if (u < 0 || u >= side || v < 0 || v >= side) continue;
      int li = local_index(side, u, v);
      count[static_cast<size_t>(li)] += 1.0;
      total += 1.0;
      int t2 = t + 1 < T ? t + 1 : t;
      int t1 = t + 1 < T ? t : t - 1;
      if (t1 >= 0)
        speed_sum[static_cast<size_t>(li)] +=
            euclid(cells[static_cast<size_t>(t2)], cells[static_cast<size_t>(t1)]);
      if (t + 1 < T) {
        int dx = cells[static_cast<size_t>(t) + 1].x - c.x;
        int dy = cells[static_cast<size_t>(t) + 1].y - c.y;
        if (dx != 0 || dy != 0) {
          double ang = std::atan2(static_cast<double>(dy), static_cast<double>(dx));
          int bin = static_cast<int>(std::floor((ang + std::numbers::pi / 8.0) /
                                                (std::numbers::pi / 4.0)));
          bin = ((bin % 8) + 8) % 8;
          dirs[static_cast<size_t>(li)][static_cast<size_t>(bin)] += 1.0;
        }
      }
    }
  }

  for (size_t li = 0; li < count.size(); ++li) {
    if (count[li] <= 0.0) continue;
    maps.density[li] = total > 0.0 ? count[li] / total : 0.0;
    maps.activeness[li] = speed_sum[li] / count[li];
    double moves = 0.0;
    for (double v : dirs[li]) moves += v;
    if (moves > 0.0) {
      double h = 0.0;
      for (double v : dirs[li])
        if (v > 0.0) {
          double p = v / moves;
          h -= p * std::log(p);
        }
      maps.entropy[li] = h;
    }
  }
  return maps;
}

FunctionalDescriptor descriptor(const FeatureMaps& maps) {
  const int w = maps.w;
  const int side = maps.side();
  const double R = w * std::numbers::sqrt2;
  std::array<double, 4> edges{};
  for (int k = 1; k <= 4; ++k) edges[static_cast<size_t>(k - 1)] = std::pow(R, k / 4.0);

  FunctionalDescriptor out{};
  const std::vector<double>* blocks[3] = {&maps.density, &maps.activeness, &maps.entropy};
  for (int b = 0; b < 3; ++b) {
    double* hist = out.data() + b * kRadialBins * kAngularBins;
    for (int v = 0; v < side; ++v)
      for (int u = 0; u < side; ++u) {
        double val = (*blocks[b])[static_cast<size_t>(local_index(side, u, v))];
        if (val == 0.0) continue;
        int dx = u - w, dy = v - w;
        if (dx == 0 && dy == 0) {
          for (int a = 0; a < kAngularBins; ++a) hist[a] += val / kAngularBins;
          continue;
        }
        double r = std::sqrt(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy);
        int rb = 1;
        while (rb < kRadialBins - 1 && r > edges[static_cast<size_t>(rb - 1)]) ++rb;
        double ang = std::atan2(static_cast<double>(dy), static_cast<double>(dx));
        int ab = static_cast<int>(
            std::floor((ang + std::numbers::pi / 8.0) / (std::numbers::pi / 4.0)));
        ab = ((ab % 8) + 8) % 8;
        hist[rb * kAngularBins + ab] += val;
      }
    double norm = 0.0;
    for (int i = 0; i < kRadialBins * kAngularBins; ++i) norm += std::abs(hist[i]);
    if (norm > 0.0)
      for (int i = 0; i < kRadialBins * kAngularBins; ++i) hist[i] /= norm;
  }
  return out;
}

std::array<int, kRadialBins * kAngularBins> dihedral_bin_permutation(int op) {
  if (op < 0 || op >= 8) throw InputError("dihedral op must lie in [0, 8)");
  const int rot = op % 4;
  const bool mirror = op >= 4;
  std::array<int, kRadialBins * kAngularBins> perm{};
  for (int r = 0; r < kRadialBins; ++r)
    for (int a = 0; a < kAngularBins; ++a) {
      // The op is mirror-about-x first, then a CCW rotation; invert to find
      // the source bin that lands at (r, a).
      int src = ((a - 2 * rot) % 8 + 8) % 8;
      if (mirror) src = (8 - src) % 8;
      perm[static_cast<size_t>(r * kAngularBins + a)] = r * kAngularBins + src;
    }
  return perm;
}

FunctionalDescriptor apply_dihedral(const FunctionalDescriptor& d, int op) {
  std::array<int, kRadialBins * kAngularBins> perm = dihedral_bin_permutation(op);
  FunctionalDescriptor out{};
  constexpr int kBlock = kRadialBins * kAngularBins;
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < kBlock; ++i)
      out[static_cast<size_t>(b * kBlock + i)] =
          d[static_cast<size_t>(b * kBlock + perm[static_cast<size_t>(i)])];
  return out;
}

ClusterResult cluster(std::span<const FunctionalDescriptor> descriptors, int k,
                      std::uint64_t seed, int restarts) {
  const int n = static_cast<int>(descriptors.size());
  if (k < 1 || k > n) throw InputError("k must lie in [1, #descriptors]");
  if (restarts < 1) throw InputError("need at least one restart");

  ClusterResult best;
  best.inertia = kInf;
  for (int run = 0; run < restarts; ++run) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(run));
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    // k-means++ seeding under the dihedral-aligned distance.
    std::vector<FunctionalDescriptor> centroids;
    std::uniform_int_distribution<int> first(0, n - 1);
    centroids.push_back(descriptors[static_cast<size_t>(first(rng))]);
    std::vector<double> d2(static_cast<size_t>(n));
    while (static_cast<int>(centroids.size()) < k) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        d2[static_cast<size_t>(i)] = align(descriptors[static_cast<size_t>(i)], centroids).dist;
        total += d2[static_cast<size_t>(i)];
      }
      int pick = 0;
      if (total > 0.0) {
        double u = u01(rng) * total;
        for (; pick + 1 < n; ++pick) {
          if (u < d2[static_cast<size_t>(pick)]) break;
          u -= d2[static_cast<size_t>(pick)];
        }
      } else {
        pick = first(rng);
      }
      centroids.push_back(descriptors[static_cast<size_t>(pick)]);
    }

    std::vector<int> labels(static_cast<size_t>(n), -1);
    std::vector<int> ops(static_cast<size_t>(n), 0);
    double inertia = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      inertia = 0.0;
      for (int i = 0; i < n; ++i) {
        Alignment a = align(descriptors[static_cast<size_t>(i)], centroids);
        if (a.label != labels[static_cast<size_t>(i)] || a.op != ops[static_cast<size_t>(i)])
          changed = true;
        labels[static_cast<size_t>(i)] = a.label;
        ops[static_cast<size_t>(i)] = a.op;
        inertia += a.dist;
      }
      if (!changed && iter > 0) break;

      std::vector<FunctionalDescriptor> sums(static_cast<size_t>(k), FunctionalDescriptor{});
      std::vector<int> sizes(static_cast<size_t>(k), 0);
      for (int i = 0; i < n; ++i) {
        FunctionalDescriptor t =
            apply_dihedral(descriptors[static_cast<size_t>(i)], ops[static_cast<size_t>(i)]);
        for (int d = 0; d < kDescriptorDim; ++d)
          sums[static_cast<size_t>(labels[static_cast<size_t>(i)])][static_cast<size_t>(d)] +=
              t[static_cast<size_t>(d)];
        sizes[static_cast<size_t>(labels[static_cast<size_t>(i)])]++;
      }
      for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<size_t>(c)] == 0) {
          // Reseed an empty cluster with the point farthest from its centroid.
          int far = 0;
          double far_d = -1.0;
          for (int i = 0; i < n; ++i) {
            FunctionalDescriptor t =
                apply_dihedral(descriptors[static_cast<size_t>(i)], ops[static_cast<size_t>(i)]);
            double d = sq_dist(t, centroids[static_cast<size_t>(labels[static_cast<size_t>(i)])]);
            if (d > far_d) {
              far_d = d;
              far = i;
            }
          }
          centroids[static_cast<size_t>(c)] = descriptors[static_cast<size_t>(far)];
          continue;
        }
        for (int d = 0; d < kDescriptorDim; ++d)
          centroids[static_cast<size_t>(c)][static_cast<size_t>(d)] =
              sums[static_cast<size_t>(c)][static_cast<size_t>(d)] / sizes[static_cast<size_t>(c)];
      }
    }

    if (inertia < best.inertia) {
      best.labels = labels;
      best.ops = ops;
      best.centroids = centroids;
      best.inertia = inertia;
    }
  }
  return best;
}

}  // namespace lam
