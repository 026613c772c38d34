#include "lam/planner.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace lam {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

struct QueueEntry {
  double cost;
  int steps;
  int idx;
  bool operator>(const QueueEntry& o) const {
    if (cost != o.cost) return cost > o.cost;
    if (steps != o.steps) return steps > o.steps;
    return idx > o.idx;
  }
};

using MinQueue = std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>>;

double step_norm(int dx, int dy) { return (dx != 0 && dy != 0) ? kSqrt2 : 1.0; }

double edge_energy(const VectorField& field, Cell tail, int dx, int dy) {
  Vec2 f = field.at(tail);
  return std::abs(f.x * dx + f.y * dy);
}

// Relaxation order shared by both sweeps: lower cost first, then fewer
// steps, then the smaller predecessor index so reconstruction is unique.
struct NodeState {
  double cost = kInf;
  double energy = kInf;
  int steps = 0;
  int parent = -1;
};

bool improves(const NodeState& cur, double cost, int steps, int parent) {
  if (cost < cur.cost) return true;
  if (cost > cur.cost) return false;
  if (steps != cur.steps) return steps < cur.steps;
  return parent < cur.parent;
}

}  // namespace

PlannedPath dijkstra_path(const ConstraintMap& map, const VectorField& field, Cell start,
                          Cell goal, double epsilon) {
  const Lattice& lat = map.lattice();
  if (lat != field.lattice()) throw std::invalid_argument("field does not match constraint map");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  int start_idx = lat.index(start);
  int goal_idx = lat.index(goal);

  std::vector<NodeState> nodes(static_cast<size_t>(lat.size()));
  nodes[start_idx] = {0.0, 0.0, 0, start_idx};
  MinQueue queue;
  queue.push({0.0, 0, start_idx});

  while (!queue.empty()) {
    QueueEntry top = queue.top();
    queue.pop();
    NodeState& u = nodes[top.idx];
    if (top.cost != u.cost || top.steps != u.steps) continue;
    if (top.idx == goal_idx) break;
    Cell uc = lat.cell(top.idx);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        Cell vc{uc.x + dx, uc.y + dy};
        if (!lat.contains(vc)) continue;
        int v_idx = lat.index(vc);
        if (v_idx != goal_idx && !map.walkable(vc)) continue;
        double e = edge_energy(field, uc, dx, dy);
        double cost = u.cost + e + epsilon * step_norm(dx, dy);
        int steps = u.steps + 1;
        NodeState& v = nodes[v_idx];
        if (improves(v, cost, steps, top.idx)) {
          double energy = u.energy + e;
          bool requeue = cost < v.cost || steps != v.steps;
          v = {cost, energy, steps, top.idx};
          if (requeue) queue.push({cost, steps, v_idx});
        }
      }
    }
  }

  PlannedPath out;
  const NodeState& g = nodes[goal_idx];
  if (g.cost == kInf) return out;
  out.reachable = true;
  out.cost = g.cost;
  out.energy = g.energy;
  for (int at = goal_idx;; at = nodes[at].parent) {
    out.cells.push_back(lat.cell(at));
    if (at == start_idx) break;
  }
  std::reverse(out.cells.begin(), out.cells.end());
  return out;
}

std::vector<PlannedPath> multi_goal_path(const ConstraintMap& map,
                                         std::span<const VectorField* const> leg_fields,
                                         Cell start, std::span<const Cell> goals,
                                         double epsilon) {
  if (leg_fields.size() != goals.size())
    throw std::invalid_argument("one field per goal leg required");
  std::vector<PlannedPath> legs;
  legs.reserve(goals.size());
  Cell at = start;
  bool alive = true;
  for (size_t k = 0; k < goals.size(); ++k) {
    if (!alive) {
      legs.emplace_back();
      continue;
    }
    legs.push_back(dijkstra_path(map, *leg_fields[k], at, goals[k], epsilon));
    if (!legs.back().reachable) {
      alive = false;
    } else {
      at = goals[k];
    }
  }
  return legs;
}

CostToGo cost_to_go_table(const ConstraintMap& map, const VectorField& field, Cell goal,
                          double epsilon) {
  const Lattice& lat = map.lattice();
  if (lat != field.lattice()) throw std::invalid_argument("field does not match constraint map");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  int goal_idx = lat.index(goal);

  std::vector<NodeState> nodes(static_cast<size_t>(lat.size()));
  nodes[goal_idx] = {0.0, 0.0, 0, goal_idx};
  MinQueue queue;
  queue.push({0.0, 0, goal_idx});

  // Reverse sweep: relax the forward edge u -> v (weight sampled at u) while
  // expanding from v. Any cell may start a path, so u is not required to be
  // walkable; only cells strictly inside a longer path are, which holds
  // because non-walkable u never re-expands as somebody's v unless it is the
  // goal itself.
  while (!queue.empty()) {
    QueueEntry top = queue.top();
    queue.pop();
    NodeState& v = nodes[top.idx];
    if (top.cost != v.cost || top.steps != v.steps) continue;
    Cell vc = lat.cell(top.idx);
    if (top.idx != goal_idx && !map.walkable(vc)) continue;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        Cell uc{vc.x + dx, vc.y + dy};
        if (!lat.contains(uc)) continue;
        int u_idx = lat.index(uc);
        double e = edge_energy(field, uc, -dx, -dy);
        double cost = v.cost + e + epsilon * step_norm(dx, dy);
        int steps = v.steps + 1;
        NodeState& u = nodes[u_idx];
        if (improves(u, cost, steps, top.idx)) {
          double energy = v.energy + e;
          bool requeue = cost < u.cost || steps != u.steps;
          u = {cost, energy, steps, top.idx};
          if (requeue) queue.push({cost, steps, u_idx});
        }
      }
    }
  }

  CostToGo out{lat, {}, {}};
  out.cost.resize(nodes.size());
  out.energy.resize(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    out.cost[i] = nodes[i].cost;
    out.energy[i] = nodes[i].energy;
  }
  return out;
}

Cell greedy_step(const ConstraintMap& map, const VectorField& field, const CostToGo& togo,
                 Cell from, double epsilon) {
  const Lattice& lat = map.lattice();
  if (togo.cost_at(from) == 0.0) return from;
  Cell best = from;
  double best_total = kInf;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      Cell n{from.x + dx, from.y + dy};
      if (!lat.contains(n)) continue;
      double rest = togo.cost_at(n);
      if (rest == kInf) continue;
      if (rest != 0.0 && !map.walkable(n)) continue;
      double total = edge_energy(field, from, dx, dy) + epsilon * step_norm(dx, dy) + rest;
      if (total < best_total) {
        best_total = total;
        best = n;
      }
    }
  }
  return best;
}

double path_energy(std::span<const Cell> cells, const VectorField& field) {
  double total = 0.0;
  for (size_t t = 0; t + 1 < cells.size(); ++t) {
    int dx = cells[t + 1].x - cells[t].x;
    int dy = cells[t + 1].y - cells[t].y;
    if (dx == 0 && dy == 0) continue;
    total += edge_energy(field, cells[t], dx, dy);
  }
  return total;
}

std::vector<double> path_energy_prefix(std::span<const Cell> cells, const VectorField& field) {
  std::vector<double> cum(cells.size(), 0.0);
  for (size_t t = 0; t + 1 < cells.size(); ++t) {
    int dx = cells[t + 1].x - cells[t].x;
    int dy = cells[t + 1].y - cells[t].y;
    double e = (dx == 0 && dy == 0) ? 0.0 : edge_energy(field, cells[t], dx, dy);
    cum[t + 1] = cum[t] + e;
  }
  return cum;
}

}  // namespace lam
