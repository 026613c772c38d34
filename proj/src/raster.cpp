#include "lam/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace lam {
namespace {

std::uint8_t scale_byte(double v, double lo, double hi) {
  if (hi <= lo) return 0;
  double t = (v - lo) / (hi - lo);
  return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
}

void fill_cell(Image& img, Cell c, int cell_size, Rgb color) {
  for (int dy = 0; dy < cell_size; ++dy)
    for (int dx = 0; dx < cell_size; ++dx)
      img.at(c.x * cell_size + dx, c.y * cell_size + dy) = color;
}

Rgb agent_hue(int i) {
  // A fixed palette cycled by agent index; saturated against the light floor.
  static constexpr Rgb kPalette[] = {
      Rgb{200, 40, 40},  Rgb{40, 110, 200}, Rgb{40, 160, 60},  Rgb{190, 120, 20},
      Rgb{140, 50, 180}, Rgb{20, 150, 150}, Rgb{180, 40, 120}, Rgb{110, 110, 30},
  };
  return kPalette[static_cast<size_t>(i) % std::size(kPalette)];
}

}  // namespace

std::string encode_ppm(const Image& img) {
  if (img.width < 1 || img.height < 1) throw InputError("image must be non-empty");
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.reserve(out.size() + img.px.size() * 3);
  for (const Rgb& p : img.px) {
    out.push_back(static_cast<char>(p.r));
    out.push_back(static_cast<char>(p.g));
    out.push_back(static_cast<char>(p.b));
  }
  return out;
}

std::string encode_pgm(const std::vector<double>& values, int width, int height, double lo,
                       double hi) {
  if (width < 1 || height < 1 || values.size() != static_cast<size_t>(width) * height)
    throw InputError("value grid does not match the stated shape");
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.reserve(out.size() + values.size());
  for (double v : values) out.push_back(static_cast<char>(scale_byte(v, lo, hi)));
  return out;
}

Image render_heatmap(const std::vector<double>& values, const Lattice& lat, int cell_size,
                     double lo, double hi) {
  if (cell_size < 1) throw InputError("cell size must be positive");
  if (values.size() != static_cast<size_t>(lat.size()))
    throw InputError("one value per lattice cell required");
  Image img(lat.width() * cell_size, lat.height() * cell_size);
  for (int i = 0; i < lat.size(); ++i) {
    std::uint8_t g = scale_byte(values[static_cast<size_t>(i)], lo, hi);
    fill_cell(img, lat.cell(i), cell_size, Rgb{g, g, g});
  }
  return img;
}

Image render_field_magnitude(const VectorField& field, int cell_size) {
  const Lattice& lat = field.lattice();
  std::vector<double> mags(static_cast<size_t>(lat.size()));
  double hi = 0.0;
  for (int i = 0; i < lat.size(); ++i) {
    mags[static_cast<size_t>(i)] = field.magnitude(lat.cell(i));
    hi = std::max(hi, mags[static_cast<size_t>(i)]);
  }
  return render_heatmap(mags, lat, cell_size, 0.0, hi);
}

Image render_scene(const Scene& scene, int cell_size) {
  if (cell_size < 1) throw InputError("cell size must be positive");
  const Lattice& lat = scene.lattice();
  Image img(lat.width() * cell_size, lat.height() * cell_size);
  for (int i = 0; i < lat.size(); ++i) {
    Cell c = lat.cell(i);
    fill_cell(img, c, cell_size, scene.constraints.walkable(c) ? Rgb{235, 235, 235}
                                                               : Rgb{40, 40, 40});
  }
  for (size_t i = 0; i < scene.agents.size(); ++i) {
    Rgb hue = agent_hue(static_cast<int>(i));
    for (Cell c : scene.agents[i].traj.observed()) fill_cell(img, c, cell_size, hue);
  }
  for (const Source& s : scene.sources) {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        Cell c{s.mu.x + dx, s.mu.y + dy};
        if (!lat.contains(c)) continue;
        bool edge = dx != 0 || dy != 0;
        fill_cell(img, c, cell_size, edge ? Rgb{255, 215, 0} : Rgb{255, 255, 255});
      }
  }
  return img;
}

void save_image(const Image& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path + " for writing");
  std::string bytes = encode_ppm(img);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InputError("failed writing " + path);
}

}  // namespace lam
