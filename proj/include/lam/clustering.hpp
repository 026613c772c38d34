#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lam/model.hpp"
#include "lam/scene.hpp"

namespace lam {

inline constexpr int kMapWindow = 10;      // half-width; patch is 21x21
inline constexpr int kRadialBins = 5;      // bin 0 = the center cell
inline constexpr int kAngularBins = 8;     // 45-degree sectors offset 22.5
inline constexpr int kDescriptorDim = 3 * kRadialBins * kAngularBins;

/// Local traffic statistics in a (2w+1)^2 patch around a source: visit
/// counts, mean speed, and per-cell move-direction entropy (8 bins, stays
/// excluded, nats).
struct FeatureMaps {
  int w = kMapWindow;
  std::vector<double> density;
  std::vector<double> activeness;
  std::vector<double> entropy;

  int side() const { return 2 * w + 1; }
};

/// Accumulates the full trajectories of agents related to source j over the
/// window centered at that source. No associated agents -> all-zero maps.
FeatureMaps build_feature_maps(const Scene& scene, const RelationMatrix& rel, int source_index,
                               int w = kMapWindow);

/// Log-polar histogram per map (radial bin 0 spreads the center cell evenly
/// over the angular bins), each 40-bin block L1-normalized, concatenated
/// density | activeness | entropy.
using FunctionalDescriptor = std::array<double, kDescriptorDim>;

FunctionalDescriptor descriptor(const FeatureMaps& maps);

/// Bin permutation realizing dihedral op (0..7: rotations by 90 degrees,
/// then the same four mirrored) on one 40-bin log-polar block.
std::array<int, kRadialBins * kAngularBins> dihedral_bin_permutation(int op);

FunctionalDescriptor apply_dihedral(const FunctionalDescriptor& d, int op);

struct ClusterResult {
  std::vector<int> labels;
  std::vector<int> ops;  // dihedral op aligning each descriptor to its centroid
  std::vector<FunctionalDescriptor> centroids;
  double inertia = 0.0;
};

/// K-means where each assignment canonicalizes the descriptor over the 8
/// dihedral transforms against the nearest centroid; keeps the best of
/// `restarts` seeded runs by within-cluster sum of squares.
/// Throws InputError when k exceeds the descriptor count or k < 1.
ClusterResult cluster(std::span<const FunctionalDescriptor> descriptors, int k,
                      std::uint64_t seed, int restarts = 10);

}  // namespace lam
