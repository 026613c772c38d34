#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <vector>

#include "lam/grid.hpp"
#include "lam/scene.hpp"

namespace lam {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

struct FieldParams {
  double sigma_r_sq = 1e-2;  // repulsion spread
  double sigma_a_sq = 1e4;   // attraction spread, shared by all sources
};

/// Dense per-cell 2D vector field over a lattice.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const Lattice& lat)
      : lat_(lat),
        fx_(static_cast<size_t>(lat.size()), 0.0),
        fy_(static_cast<size_t>(lat.size()), 0.0) {}

  const Lattice& lattice() const { return lat_; }
  Vec2 at(Cell c) const {
    size_t i = static_cast<size_t>(lat_.index(c));
    return Vec2{fx_[i], fy_[i]};
  }
  double magnitude(Cell c) const {
    Vec2 v = at(c);
    return std::sqrt(v.x * v.x + v.y * v.y);
  }

  std::vector<double>& fx() { return fx_; }
  std::vector<double>& fy() { return fy_; }
  const std::vector<double>& fx() const { return fx_; }
  const std::vector<double>& fy() const { return fy_; }

 private:
  Lattice lat_;
  std::vector<double> fx_, fy_;
};

/// Chebyshev radius beyond which repulsion contributions are dropped:
/// ceil(4 * sigma_r), at least 1. Cells at Chebyshev distance >= cutoff
/// from an obstacle receive exactly zero from it.
int repulsion_cutoff(double sigma_r_sq);

/// Summed short-range Gaussian push-back from every non-walkable cell.
VectorField repulsion_field(const ConstraintMap& map, double sigma_r_sq);

/// Gaussian pull toward mu: magnitude exp(-|x-mu|^2 / (2 sigma_a_sq)),
/// direction unit(mu - x), zero vector at mu itself.
VectorField attraction_field(const Lattice& lat, Cell mu, double sigma_a_sq);

/// Elementwise sum; throws std::invalid_argument on lattice mismatch.
VectorField sum_fields(const VectorField& a, const VectorField& b);

/// Attraction of every source plus repulsion (potential-baseline field).
VectorField superposed_field(const ConstraintMap& map, const std::vector<Source>& sources,
                             const FieldParams& params);

/// Lazy per-source cumulative fields (attraction + shared repulsion).
/// Thread-safe: concurrent misses populate each entry once.
class FieldCache {
 public:
  FieldCache(const ConstraintMap& map, std::vector<Source> sources, FieldParams params);

  const VectorField& repulsion() const { return repulsion_; }
  const VectorField& cumulative(int source_index) const;
  const std::vector<Source>& sources() const { return sources_; }
  const FieldParams& params() const { return params_; }

 private:
  std::vector<Source> sources_;
  FieldParams params_;
  VectorField repulsion_;
  Lattice lat_;
  mutable std::mutex mu_;
  mutable std::vector<std::unique_ptr<VectorField>> cumulative_;
};

}  // namespace lam
