#include "lam/grid.hpp"

#include <cmath>

namespace lam {

double euclid(Cell a, Cell b) {
  double dx = a.x - b.x;
  double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

std::int64_t ConstraintMap::walkable_count() const {
  std::int64_t n = 0;
  for (auto v : labels_) n += v > 0;
  return n;
}

std::vector<Cell> walkable_neighbors(const ConstraintMap& map, Cell c) {
  const Lattice& lat = map.lattice();
  if (!lat.contains(c)) throw std::out_of_range("walkable_neighbors: cell outside lattice");
  std::vector<Cell> out;
  out.reserve(8);
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      Cell n{c.x + dx, c.y + dy};
      if (lat.contains(n) && map.walkable(n)) out.push_back(n);
    }
  return out;
}

std::vector<Cell> walkable_actions(const ConstraintMap& map, Cell c) {
  const Lattice& lat = map.lattice();
  if (!lat.contains(c)) throw std::out_of_range("walkable_actions: cell outside lattice");
  std::vector<Cell> out;
  out.reserve(9);
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      Cell n{c.x + dx, c.y + dy};
      if (!lat.contains(n)) continue;
      if ((dx == 0 && dy == 0) || map.walkable(n)) out.push_back(n);
    }
  return out;
}

bool walkable_connected(const ConstraintMap& map) {
  const Lattice& lat = map.lattice();
  const int n = lat.size();
  int first = -1;
  std::int64_t total = 0;
  for (int i = 0; i < n; ++i) {
    if (map.labels()[static_cast<size_t>(i)] > 0) {
      if (first < 0) first = i;
      ++total;
    }
  }
  if (total == 0) return true;

  std::vector<char> seen(static_cast<size_t>(n), 0);
  std::vector<int> stack{first};
  seen[static_cast<size_t>(first)] = 1;
  std::int64_t reached = 0;
  while (!stack.empty()) {
    int i = stack.back();
    stack.pop_back();
    ++reached;
    for (Cell nb : walkable_neighbors(map, lat.cell(i))) {
      int j = lat.index(nb);
      if (!seen[static_cast<size_t>(j)]) {
        seen[static_cast<size_t>(j)] = 1;
        stack.push_back(j);
      }
    }
  }
  return reached == total;
}

}  // namespace lam
