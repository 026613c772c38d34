#include "lam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "lam/mcmc.hpp"
#include "lam/planner.hpp"

namespace lam {
namespace {

constexpr int kLayoutAttempts = 100;
constexpr int kSpawnAttempts = 20;

void check_config(const SynthConfig& c) {
  if (c.width < 4 || c.height < 4) throw InputError("scene must be at least 4x4");
  if (c.n_sources < 1) throw InputError("need at least one source");
  if (c.n_agents < 0) throw InputError("negative agent count");
  if (c.obstacle_ratio < 0.0 || c.obstacle_ratio > 0.5)
    throw InputError("obstacle ratio must lie in [0, 0.5]");
  if (c.jitter < 0.0 || c.jitter > 1.0) throw InputError("jitter must lie in [0, 1]");
  if (c.speed <= 0.0 || c.speed > 1.0) throw InputError("speed must lie in (0, 1]");
  if (c.p_single < 0.0 || c.p_sequential < 0.0 || c.p_change < 0.0 ||
      c.p_single + c.p_sequential + c.p_change <= 0.0)
    throw InputError("behavior mix must be nonnegative with positive sum");
  if (c.observed_fraction <= 0.0 || c.observed_fraction > 1.0)
    throw InputError("observed fraction must lie in (0, 1]");
  if (c.dwell < 0) throw InputError("negative dwell");
  if (c.min_source_separation < 1) throw InputError("source separation must be positive");
}

std::vector<Cell> walkable_cells(const ConstraintMap& map) {
  std::vector<Cell> out;
  const Lattice& lat = map.lattice();
  for (int i = 0; i < lat.size(); ++i)
    if (map.walkable(lat.cell(i))) out.push_back(lat.cell(i));
  return out;
}

int sign(int v) { return v > 0 ? 1 : v < 0 ? -1 : 0; }

}  // namespace

Scene generate_layout(const SynthConfig& config, std::mt19937_64& rng) {
  check_config(config);
  Lattice lat(config.width, config.height);
  ConstraintMap map(lat, 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const double lo = config.obstacle_ratio - config.ratio_tolerance;
  const double hi = config.obstacle_ratio + config.ratio_tolerance;
  const int max_side = std::max(2, std::min(config.width, config.height) / 6);
  std::uniform_int_distribution<int> side(2, max_side);
  int obstacles = 0;
  int failures = 0;
  while (static_cast<double>(obstacles) / lat.size() < lo) {
    if (failures >= kLayoutAttempts)
      throw GenerationError("could not reach the obstacle ratio while staying connected");
    int w = side(rng), h = side(rng);
    std::uniform_int_distribution<int> px(0, config.width - w);
    std::uniform_int_distribution<int> py(0, config.height - h);
    int x0 = px(rng), y0 = py(rng);
    std::vector<Cell> flipped;
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) {
        Cell c{x, y};
        if (map.walkable(c)) {
          map.set(c, -1);
          flipped.push_back(c);
        }
      }
    double ratio = static_cast<double>(obstacles + flipped.size()) / lat.size();
    if (flipped.empty() || ratio > hi || !walkable_connected(map)) {
      for (Cell c : flipped) map.set(c, 1);
      ++failures;
      continue;
    }
    obstacles += static_cast<int>(flipped.size());
  }

  Scene scene;
  scene.constraints = map;

  std::vector<Cell> open = walkable_cells(map);
  const int margin = std::max(0, config.source_margin);
  std::vector<Cell> interior;
  for (Cell c : open)
    if (c.x >= margin && c.y >= margin && c.x < config.width - margin &&
        c.y < config.height - margin)
      interior.push_back(c);
  const std::vector<Cell>& pool = interior.empty() ? open : interior;
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  int tries = 0;
  while (static_cast<int>(scene.sources.size()) < config.n_sources) {
    if (++tries > 1000)
      throw GenerationError("could not place sources at the required separation");
    Cell mu = pool[pick(rng)];
    bool ok = true;
    for (const Source& s : scene.sources)
      if (euclid(s.mu, mu) < config.min_source_separation) ok = false;
    if (!ok) continue;
    scene.sources.push_back(Source{mu, 1.0, 0.0, 1.0});
  }

  GroundTruth truth;
  for (const Source& s : scene.sources) {
    GroundTruth::TrueSource t;
    t.mu = s.mu;
    t.box = {std::max(0.0, s.mu.x - 2.0), std::max(0.0, s.mu.y - 2.0),
             std::min(config.width - 1.0, s.mu.x + 2.0),
             std::min(config.height - 1.0, s.mu.y + 2.0)};
    truth.sources.push_back(t);
  }
  scene.truth = std::move(truth);

  if (config.features) {
    FeatureChannel feat;
    feat.color.resize(static_cast<size_t>(lat.size()));
    feat.ground.resize(static_cast<size_t>(lat.size()));
    std::normal_distribution<float> noise(0.0f, 0.05f);
    for (int i = 0; i < lat.size(); ++i) {
      bool open_cell = map.walkable(lat.cell(i));
      float base = open_cell ? 0.25f : 0.75f;
      for (int ch = 0; ch < 3; ++ch)
        feat.color[static_cast<size_t>(i)][static_cast<size_t>(ch)] =
            std::clamp(base + noise(rng), 0.0f, 1.0f);
      feat.ground[static_cast<size_t>(i)] = open_cell ? 1 : 0;
    }
    scene.features = std::move(feat);
  }
  return scene;
}

namespace {

struct WalkPlan {
  Behavior z;
  std::vector<int> order;  // goal visit order; {from, to} for a change
};

// One frame of geodesic descent with optional lateral jitter.
Cell jittered_step(const ConstraintMap& map, const GoalTables& tables, int goal, Cell cur,
                   double jitter, std::mt19937_64& rng, std::uniform_real_distribution<double>& u01) {
  Cell planned = greedy_step(map, tables.field(goal), tables.togo(goal), cur, tables.epsilon());
  if (planned == cur) return cur;
  if (u01(rng) < jitter) {
    std::vector<Cell> lateral;
    for (Cell nb : walkable_neighbors(map, planned))
      if (chebyshev(nb, cur) <= 1 && nb != cur) lateral.push_back(nb);
    if (!lateral.empty()) {
      std::uniform_int_distribution<size_t> pick(0, lateral.size() - 1);
      return lateral[pick(rng)];
    }
  }
  return planned;
}

}  // namespace

void simulate_agents(Scene& scene, const SynthConfig& config, std::mt19937_64& rng) {
  check_config(config);
  if (!scene.truth) scene.truth = GroundTruth{};
  GoalTables tables(scene.constraints, scene.sources, config.field, config.epsilon);
  const ConstraintMap& map = scene.constraints;
  std::vector<Cell> open = walkable_cells(map);
  if (open.empty()) throw GenerationError("no walkable cells to spawn on");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<size_t> spawn_pick(0, open.size() - 1);
  const int n = static_cast<int>(scene.sources.size());
  const int max_goals = std::min(3, n);
  const int step_cap = 4 * (config.width + config.height);

  for (int i = 0; i < config.n_agents; ++i) {
    // Behavior and goals first; the spawn retries keep them fixed.
    WalkPlan plan;
    double total = config.p_single + config.p_sequential + config.p_change;
    double u = u01(rng) * total;
    if (n >= 2 && u >= config.p_single && u < config.p_single + config.p_sequential)
      plan.z = Behavior::kSequential;
    else if (n >= 2 && u >= config.p_single + config.p_sequential)
      plan.z = Behavior::kChange;
    else
      plan.z = Behavior::kSingle;

    std::vector<int> ids(static_cast<size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    for (size_t k = ids.size(); k > 1; --k) {
      std::uniform_int_distribution<size_t> d(0, k - 1);
      std::swap(ids[k - 1], ids[d(rng)]);
    }
    int want = 1;
    if (plan.z == Behavior::kSequential) {
      std::uniform_int_distribution<int> d(2, max_goals);
      want = d(rng);
    } else if (plan.z == Behavior::kChange) {
      want = 2;
    }
    plan.order.assign(ids.begin(), ids.begin() + want);

    bool placed = false;
    for (int attempt = 0; attempt < kSpawnAttempts && !placed; ++attempt) {
      Cell spawn = open[spawn_pick(rng)];
      if (spawn == tables.source(plan.order[0]).mu) continue;
      if (tables.togo(plan.order[0]).cost_at(spawn) ==
          std::numeric_limits<double>::infinity())
        continue;

      std::vector<Cell> cells{spawn};
      int switch_frame = -1;
      bool ok = true;

      if (plan.z == Behavior::kChange) {
        PlannedPath leg = dijkstra_path(map, tables.field(plan.order[0]), spawn,
                                        tables.source(plan.order[0]).mu, tables.epsilon());
        int len = leg.steps();
        if (len < 2) continue;
        std::uniform_int_distribution<int> d(std::max(1, static_cast<int>(0.2 * len)),
                                             std::max(1, static_cast<int>(0.8 * len)));
        int switch_after = d(rng);
        int moves = 0;
        int goal = plan.order[0];
        while (cells.back() != tables.source(plan.order[1]).mu) {
          if (static_cast<int>(cells.size()) > step_cap * 2) {
            ok = false;
            break;
          }
          if (u01(rng) >= config.speed) {
            cells.push_back(cells.back());
            continue;
          }
          if (goal == plan.order[0] &&
              (moves >= switch_after || cells.back() == tables.source(goal).mu)) {
            goal = plan.order[1];
            switch_frame = static_cast<int>(cells.size()) - 1;
          }
          Cell next = jittered_step(map, tables, goal, cells.back(), config.jitter, rng, u01);
          if (next != cells.back()) ++moves;
          cells.push_back(next);
        }
        if (ok && switch_frame < 0) ok = false;
      } else {
        for (size_t g = 0; g < plan.order.size() && ok; ++g) {
          int goal = plan.order[g];
          int guard = 0;
          while (cells.back() != tables.source(goal).mu) {
            if (++guard > step_cap) {
              ok = false;
              break;
            }
            if (u01(rng) >= config.speed) {
              cells.push_back(cells.back());
              continue;
            }
            cells.push_back(jittered_step(map, tables, goal, cells.back(), config.jitter, rng, u01));
          }
          if (ok && plan.z == Behavior::kSequential && g + 1 < plan.order.size())
            for (int d = 0; d < config.dwell; ++d) cells.push_back(cells.back());
        }
      }
      // Every behavior parks at its final goal; the stay is what makes the
      // source observable when trajectories are truncated.
      if (ok)
        for (int d = 0; d < config.dwell; ++d) cells.push_back(cells.back());
      if (!ok || cells.size() < 2) continue;

      Agent agent;
      agent.id = static_cast<int>(scene.agents.size());
      agent.traj.cells = std::move(cells);
      agent.traj.t0 = static_cast<int>(agent.traj.cells.size());
      agent.traj.horizon = agent.traj.t0;
      scene.agents.push_back(std::move(agent));

      std::vector<int> row = plan.order;
      if (plan.z != Behavior::kChange) std::sort(row.begin(), row.end());
      scene.truth->goal_orders.push_back(plan.z == Behavior::kChange ? plan.order : row);
      scene.truth->behaviors.push_back(plan.z);
      scene.truth->switch_frames.push_back(switch_frame);
      placed = true;
    }
    if (!placed)
      throw GenerationError("could not route agent " + std::to_string(i) + " to its goals");
  }
}

void truncate_observations(Scene& scene, double fraction) {
  if (fraction <= 0.0 || fraction > 1.0) throw InputError("fraction must lie in (0, 1]");
  for (Agent& a : scene.agents) {
    int len = static_cast<int>(a.traj.cells.size());
    a.traj.t0 = std::clamp(static_cast<int>(std::ceil(fraction * len)), 1, len);
  }
}

Scene synth_scene(const SynthConfig& config) {
  std::mt19937_64 rng(config.seed);
  Scene scene = generate_layout(config, rng);
  simulate_agents(scene, config, rng);
  truncate_observations(scene, config.observed_fraction);
  require_valid(scene);
  return scene;
}

std::vector<Trajectory> archetype_trajectories(const ConstraintMap& cmap, Cell mu, Archetype kind,
                                               int n_agents, std::uint64_t seed) {
  const Lattice& lat = cmap.lattice();
  if (!lat.contains(mu)) throw InputError("archetype center outside lattice");
  if (n_agents < 1) throw InputError("need at least one trajectory");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  constexpr int kDirs = 8;
  const int dir_dx[kDirs] = {1, 1, 0, -1, -1, -1, 0, 1};
  const int dir_dy[kDirs] = {0, 1, 1, 1, 0, -1, -1, -1};
  auto run_length = [&](int d) {
    int len = 0;
    Cell c = mu;
    while (true) {
      Cell nxt{c.x + dir_dx[d], c.y + dir_dy[d]};
      if (!lat.contains(nxt) || !cmap.walkable(nxt)) break;
      c = nxt;
      ++len;
    }
    return len;
  };

  std::vector<Trajectory> out;
  if (kind == Archetype::kQueue) {
    // Single file along the longest open ray, advancing every third frame.
    int lane_dir = 0, lane_len = -1;
    for (int d = 0; d < kDirs; ++d) {
      int len = run_length(d);
      if (len > lane_len) {
        lane_len = len;
        lane_dir = d;
      }
    }
    if (lane_len < 2) throw GenerationError("no open lane at the queue center");
    auto lane_cell = [&](int depth) {
      return Cell{mu.x + dir_dx[lane_dir] * depth, mu.y + dir_dy[lane_dir] * depth};
    };
    const int frames = 45;
    for (int i = 0; i < n_agents; ++i) {
      int park = std::min(1 + i, lane_len);
      int depth = std::min(park + 6, lane_len);
      Trajectory t;
      t.cells.push_back(lane_cell(depth));
      for (int f = 1; f < frames; ++f) {
        if (f % 3 == 0 && depth > park) --depth;
        t.cells.push_back(lane_cell(depth));
      }
      t.t0 = t.horizon = static_cast<int>(t.cells.size());
      out.push_back(std::move(t));
    }
  } else if (kind == Archetype::kDwell) {
    // Brisk approach, a long stationary stay beside the center, then leave.
    double offset = u01(rng) * 2.0 * std::numbers::pi / n_agents;
    for (int i = 0; i < n_agents; ++i) {
      double ang = offset + 2.0 * std::numbers::pi * i / n_agents;
      int sx = sign(static_cast<int>(std::lround(std::cos(ang) * 10)));
      int sy = sign(static_cast<int>(std::lround(std::sin(ang) * 10)));
      if (sx == 0 && sy == 0) sx = 1;
      Cell start = mu;
      for (int s = 0; s < 9; ++s) {
        Cell nxt{start.x + sx, start.y + sy};
        if (!lat.contains(nxt) || !cmap.walkable(nxt)) break;
        start = nxt;
      }
      Trajectory t;
      t.cells.push_back(start);
      while (chebyshev(t.cells.back(), mu) > 1) {
        Cell cur = t.cells.back();
        Cell nxt{cur.x + sign(mu.x - cur.x), cur.y + sign(mu.y - cur.y)};
        if (!cmap.walkable(nxt)) break;
        t.cells.push_back(nxt);
      }
      for (int s = 0; s < 30; ++s) t.cells.push_back(t.cells.back());
      for (int s = 0; s < 6; ++s) {
        Cell cur = t.cells.back();
        Cell nxt{cur.x + sx, cur.y + sy};
        if (!lat.contains(nxt) || !cmap.walkable(nxt)) break;
        t.cells.push_back(nxt);
      }
      t.t0 = t.horizon = static_cast<int>(t.cells.size());
      out.push_back(std::move(t));
    }
  } else {
    // Fast straight dispersal out of the center.
    for (int i = 0; i < n_agents; ++i) {
      int d = i % kDirs;
      Trajectory t;
      t.cells.push_back(mu);
      for (int s = 0; s < 12; ++s) {
        Cell cur = t.cells.back();
        Cell nxt{cur.x + dir_dx[d], cur.y + dir_dy[d]};
        if (!lat.contains(nxt) || !cmap.walkable(nxt)) break;
        t.cells.push_back(nxt);
      }
      if (t.cells.size() < 2) continue;
      t.t0 = t.horizon = static_cast<int>(t.cells.size());
      out.push_back(std::move(t));
    }
    if (out.empty()) throw GenerationError("exit center is fully enclosed");
  }
  return out;
}

}  // namespace lam
