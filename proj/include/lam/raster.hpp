#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lam/field.hpp"
#include "lam/scene.hpp"

namespace lam {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;

  friend bool operator==(const Rgb& a, const Rgb& b) = default;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> px;

  Image() = default;
  Image(int w, int h, Rgb fill = Rgb{}) : width(w), height(h), px(static_cast<size_t>(w) * h, fill) {}

  Rgb& at(int x, int y) { return px[static_cast<size_t>(y) * width + x]; }
  const Rgb& at(int x, int y) const { return px[static_cast<size_t>(y) * width + x]; }
};

/// Binary P6; bytes are deterministic for identical input.
std::string encode_ppm(const Image& img);

/// Binary P5 from values linearly mapped [lo, hi] -> [0, 255], clamped.
/// lo == hi maps everything to 0.
std::string encode_pgm(const std::vector<double>& values, int width, int height, double lo,
                       double hi);

/// Grayscale heatmap of per-cell values scaled up by cell_size.
Image render_heatmap(const std::vector<double>& values, const Lattice& lat, int cell_size,
                     double lo, double hi);

/// Field magnitude heatmap (auto-scaled to the field's own max).
Image render_field_magnitude(const VectorField& field, int cell_size);

/// Obstacle mask + trajectories + source markers. Walkable cells light,
/// obstacles dark, observed prefixes in per-agent hues, sources boxed.
Image render_scene(const Scene& scene, int cell_size);

void save_image(const Image& img, const std::string& path);

}  // namespace lam
