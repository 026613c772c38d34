#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lam {

/// Bad caller-provided data (paths, configs, shape mismatches).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Cell {
  int x = 0;
  int y = 0;

  friend bool operator==(const Cell& a, const Cell& b) { return a.x == b.x && a.y == b.y; }
  friend bool operator!=(const Cell& a, const Cell& b) { return !(a == b); }
  // Row-major order: used wherever ties must break deterministically.
  friend bool operator<(const Cell& a, const Cell& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  }
};

inline int chebyshev(Cell a, Cell b) {
  int dx = a.x > b.x ? a.x - b.x : b.x - a.x;
  int dy = a.y > b.y ? a.y - b.y : b.y - a.y;
  return dx > dy ? dx : dy;
}

double euclid(Cell a, Cell b);

/// Rectangular 2D lattice addressed row-major.
class Lattice {
 public:
  Lattice() = default;
  Lattice(int width, int height) : w_(width), h_(height) {
    if (width < 2 || height < 2)
      throw std::invalid_argument("lattice dimensions must be at least 2x2");
  }

  int width() const { return w_; }
  int height() const { return h_; }
  int size() const { return w_ * h_; }

  bool contains(Cell c) const { return c.x >= 0 && c.x < w_ && c.y >= 0 && c.y < h_; }
  bool on_boundary(Cell c) const {
    return c.x == 0 || c.y == 0 || c.x == w_ - 1 || c.y == h_ - 1;
  }

  int index(Cell c) const {
    if (!contains(c))
      throw std::out_of_range("cell (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                              ") outside lattice");
    return c.y * w_ + c.x;
  }
  Cell cell(int index) const {
    if (index < 0 || index >= size()) throw std::out_of_range("lattice index out of range");
    return Cell{index % w_, index / w_};
  }

  friend bool operator==(const Lattice& a, const Lattice& b) {
    return a.w_ == b.w_ && a.h_ == b.h_;
  }
  friend bool operator!=(const Lattice& a, const Lattice& b) { return !(a == b); }

 private:
  int w_ = 0;
  int h_ = 0;
};

/// Per-cell walkability labels: +1 walkable, -1 not.
class ConstraintMap {
 public:
  ConstraintMap() = default;
  explicit ConstraintMap(const Lattice& lat, std::int8_t fill = 1)
      : lat_(lat), labels_(static_cast<size_t>(lat.size()), check_label(fill)) {}

  const Lattice& lattice() const { return lat_; }

  std::int8_t at(Cell c) const { return labels_[static_cast<size_t>(lat_.index(c))]; }
  void set(Cell c, std::int8_t label) {
    labels_[static_cast<size_t>(lat_.index(c))] = check_label(label);
  }
  void flip(Cell c) {
    auto& v = labels_[static_cast<size_t>(lat_.index(c))];
    v = static_cast<std::int8_t>(-v);
  }
  bool walkable(Cell c) const { return at(c) > 0; }

  const std::vector<std::int8_t>& labels() const { return labels_; }
  std::int64_t walkable_count() const;

  friend bool operator==(const ConstraintMap& a, const ConstraintMap& b) {
    return a.lat_ == b.lat_ && a.labels_ == b.labels_;
  }

 private:
  static std::int8_t check_label(std::int8_t v) {
    if (v != 1 && v != -1) throw std::invalid_argument("constraint label must be +1 or -1");
    return v;
  }

  Lattice lat_;
  std::vector<std::int8_t> labels_;
};

/// The 8 neighbors of `c` that are inside the lattice and walkable,
/// in row-major order. The center cell is never included.
std::vector<Cell> walkable_neighbors(const ConstraintMap& map, Cell c);

/// All up-to-9 "actions" from c: walkable 8-neighbors plus staying put.
/// Staying is legal whenever c itself is inside the lattice.
std::vector<Cell> walkable_actions(const ConstraintMap& map, Cell c);

/// True when the walkable region is 8-connected (or empty).
bool walkable_connected(const ConstraintMap& map);

}  // namespace lam
