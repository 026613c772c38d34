#include "lam/field.hpp"

#include <cmath>
#include <stdexcept>

#include "lam/kernels.hpp"

namespace lam {

int repulsion_cutoff(double sigma_r_sq) {
  if (sigma_r_sq <= 0) throw std::invalid_argument("sigma_r_sq must be positive");
  int c = static_cast<int>(std::ceil(4.0 * std::sqrt(sigma_r_sq)));
  return c < 1 ? 1 : c;
}

VectorField repulsion_field(const ConstraintMap& map, double sigma_r_sq) {
  const Lattice& lat = map.lattice();
  VectorField field(lat);
  const int cutoff = repulsion_cutoff(sigma_r_sq);
  const double inv2s = 1.0 / (2.0 * sigma_r_sq);

  for (int oy = 0; oy < lat.height(); ++oy)
    for (int ox = 0; ox < lat.width(); ++ox) {
      if (map.walkable(Cell{ox, oy})) continue;
      for (int dy = -(cutoff - 1); dy <= cutoff - 1; ++dy)
        for (int dx = -(cutoff - 1); dx <= cutoff - 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          Cell c{ox + dx, oy + dy};
          if (!lat.contains(c)) continue;
          const double d2 = static_cast<double>(dx) * dx + static_cast<double>(dy) * dy;
          const double m = std::exp(-d2 * inv2s) / std::sqrt(d2);
          const size_t i = static_cast<size_t>(lat.index(c));
          field.fx()[i] += m * dx;
          field.fy()[i] += m * dy;
        }
    }
  return field;
}

VectorField attraction_field(const Lattice& lat, Cell mu, double sigma_a_sq) {
  if (sigma_a_sq <= 0) throw std::invalid_argument("sigma_a_sq must be positive");
  VectorField field(lat);
  const double inv2s = 1.0 / (2.0 * sigma_a_sq);
  for (int y = 0; y < lat.height(); ++y) {
    const size_t off = static_cast<size_t>(y) * static_cast<size_t>(lat.width());
    kernels::gaussian_field_row(field.fx().data() + off, field.fy().data() + off, lat.width(), y,
                                static_cast<double>(mu.x), static_cast<double>(mu.y), inv2s);
  }
  return field;
}

VectorField sum_fields(const VectorField& a, const VectorField& b) {
  if (a.lattice() != b.lattice())
    throw std::invalid_argument("field dimension mismatch");
  VectorField out(a.lattice());
  const size_t n = a.fx().size();
  for (size_t i = 0; i < n; ++i) {
    out.fx()[i] = a.fx()[i] + b.fx()[i];
    out.fy()[i] = a.fy()[i] + b.fy()[i];
  }
  return out;
}

VectorField superposed_field(const ConstraintMap& map, const std::vector<Source>& sources,
                             const FieldParams& params) {
  VectorField out = repulsion_field(map, params.sigma_r_sq);
  for (const Source& s : sources) {
    VectorField att = attraction_field(map.lattice(), s.mu, params.sigma_a_sq);
    for (size_t i = 0; i < out.fx().size(); ++i) {
      out.fx()[i] += att.fx()[i];
      out.fy()[i] += att.fy()[i];
    }
  }
  return out;
}

FieldCache::FieldCache(const ConstraintMap& map, std::vector<Source> sources, FieldParams params)
    : sources_(std::move(sources)),
      params_(params),
      repulsion_(repulsion_field(map, params.sigma_r_sq)),
      lat_(map.lattice()),
      cumulative_(sources_.size()) {}

const VectorField& FieldCache::cumulative(int source_index) const {
  if (source_index < 0 || source_index >= static_cast<int>(sources_.size()))
    throw std::out_of_range("source index out of range");
  std::lock_guard<std::mutex> lock(mu_);
  auto& slot = cumulative_[static_cast<size_t>(source_index)];
  if (!slot) {
    VectorField att =
        attraction_field(lat_, sources_[static_cast<size_t>(source_index)].mu, params_.sigma_a_sq);
    slot = std::make_unique<VectorField>(sum_fields(att, repulsion_));
  }
  return *slot;
}

}  // namespace lam
