#include "lam/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lam {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

void append_leg(std::vector<Cell>& path, const std::vector<Cell>& leg) {
  // leg[0] duplicates the current path end
  for (size_t i = 1; i < leg.size(); ++i) path.push_back(leg[i]);
}

void pad_to(std::vector<Cell>& path, int horizon) {
  while (static_cast<int>(path.size()) < horizon) path.push_back(path.back());
  if (static_cast<int>(path.size()) > horizon) path.resize(static_cast<size_t>(horizon));
}

}  // namespace

ChangeHypothesis score_change_hypothesis(const Scene& scene, const GoalTables& tables, int agent,
                                         int goal_a, int goal_b, const PredictParams& params) {
  if (goal_a == goal_b) throw std::invalid_argument("change requires two distinct goals");
  const Trajectory& traj = scene.agents[static_cast<size_t>(agent)].traj;
  std::span<const Cell> prefix = traj.observed();
  const int t_end = static_cast<int>(prefix.size()) - 1;
  Cell last = prefix.back();
  const VectorField& fa = tables.field(goal_a);
  const VectorField& fb = tables.field(goal_b);
  const CostToGo& togo_b = tables.togo(goal_b);
  double prior = behavior_log_prior(Behavior::kChange, 2, params.model.kappa, params.model.gamma,
                                    tables.count());

  std::vector<double> cum_a = path_energy_prefix(prefix, fa);
  std::vector<double> cum_b = path_energy_prefix(prefix, fb);

  PlannedPath to_a = dijkstra_path(tables.map(), fa, last, tables.source(goal_a).mu,
                                   tables.epsilon());
  std::vector<double> leg_a_cum;
  if (to_a.reachable) leg_a_cum = path_energy_prefix(to_a.cells, fa);

  struct Candidate {
    bool in_prefix;
    int index;  // prefix frame or planned-leg cell index
  };
  std::vector<Candidate> candidates;
  if (to_a.reachable) {
    int stride = params.exhaustive_switch ? 1 : std::max(1, params.switch_stride);
    for (int p = 0; p < static_cast<int>(to_a.cells.size()); p += stride)
      candidates.push_back(Candidate{false, p});
  }
  if (params.exhaustive_switch) {
    for (int t = 0; t <= t_end; ++t) candidates.push_back(Candidate{true, t});
  } else {
    // The prefix frame that deviates most from beelining to A.
    const CostToGo& togo_a = tables.togo(goal_a);
    int best_t = -1;
    double best_dev = -kInf;
    if (togo_a.cost_at(prefix[0]) < kInf) {
      for (int t = 0; t <= t_end; ++t) {
        if (togo_a.cost_at(prefix[static_cast<size_t>(t)]) == kInf) continue;
        double dev = cum_a[static_cast<size_t>(t)] -
                     (togo_a.energy_at(prefix[0]) - togo_a.energy_at(prefix[static_cast<size_t>(t)]));
        if (dev > best_dev) {
          best_dev = dev;
          best_t = t;
        }
      }
    }
    if (best_t >= 0) candidates.push_back(Candidate{true, best_t});
  }

  ChangeHypothesis out;
  double best_energy = kInf;
  Candidate best_cand{true, -1};
  for (const Candidate& c : candidates) {
    Cell sw = c.in_prefix ? prefix[static_cast<size_t>(c.index)]
                          : to_a.cells[static_cast<size_t>(c.index)];
    if (togo_b.cost_at(sw) == kInf) continue;
    double e;
    if (c.in_prefix) {
      e = cum_a[static_cast<size_t>(c.index)] +
          (cum_b[static_cast<size_t>(t_end)] - cum_b[static_cast<size_t>(c.index)]) +
          togo_b.energy_at(last);
    } else {
      e = cum_a[static_cast<size_t>(t_end)] + leg_a_cum[static_cast<size_t>(c.index)] +
          togo_b.energy_at(sw);
    }
    if (e < best_energy) {
      best_energy = e;
      best_cand = c;
    }
  }
  if (best_energy == kInf) return out;  // switch_frame -1, -inf

  out.log_lik = -params.model.lambda * best_energy + prior;
  out.path.assign(prefix.begin(), prefix.end());
  if (best_cand.in_prefix) {
    out.switch_frame = best_cand.index;
    PlannedPath leg_b = dijkstra_path(tables.map(), fb, last, tables.source(goal_b).mu,
                                      tables.epsilon());
    append_leg(out.path, leg_b.cells);
  } else {
    out.switch_frame = t_end + best_cand.index;
    Cell sw = to_a.cells[static_cast<size_t>(best_cand.index)];
    std::vector<Cell> head(to_a.cells.begin(),
                           to_a.cells.begin() + best_cand.index + 1);
    append_leg(out.path, head);
    PlannedPath leg_b = dijkstra_path(tables.map(), fb, sw, tables.source(goal_b).mu,
                                      tables.epsilon());
    append_leg(out.path, leg_b.cells);
  }
  return out;
}

OfflinePrediction predict_offline(const Scene& scene, const ChainSnapshot& state,
                                  const GoalTables& tables, int agent,
                                  const PredictParams& params) {
  const Trajectory& traj = scene.agents[static_cast<size_t>(agent)].traj;
  std::span<const Cell> prefix = traj.observed();
  Cell last = prefix.back();
  const int horizon = traj.horizon;
  const int n = tables.count();
  std::vector<int> goals = state.rel.goals_of(agent);
  if (goals.empty()) throw PredictionError("agent has no selected goals");

  OfflinePrediction out;
  out.agent_id = scene.agents[static_cast<size_t>(agent)].id;
  std::vector<std::vector<Cell>> paths;

  if (goals.size() == 1) {
    int g = goals[0];
    ScoredHypothesis h;
    h.z = Behavior::kSingle;
    h.goal_order = {g};
    PlannedPath leg = dijkstra_path(tables.map(), tables.field(g), last, tables.source(g).mu,
                                    tables.epsilon());
    std::vector<Cell> path(prefix.begin(), prefix.end());
    if (leg.reachable) {
      double e = path_energy(prefix, tables.field(g)) + leg.energy;
      h.score = -params.model.lambda * e +
                behavior_log_prior(Behavior::kSingle, 1, params.model.kappa, params.model.gamma, n);
      append_leg(path, leg.cells);
    }
    pad_to(path, horizon);
    out.hypotheses.push_back(h);
    paths.push_back(std::move(path));
  } else {
    const int k = static_cast<int>(goals.size());
    double seq_prior = behavior_log_prior(Behavior::kSequential, k, params.model.kappa,
                                          params.model.gamma, n);
    std::vector<int> order = goals;  // ascending, so next_permutation walks lexicographically
    do {
      ScoredHypothesis h;
      h.z = Behavior::kSequential;
      h.goal_order = order;
      std::vector<const VectorField*> leg_fields;
      std::vector<Cell> goal_cells;
      for (int g : order) {
        leg_fields.push_back(&tables.field(g));
        goal_cells.push_back(tables.source(g).mu);
      }
      std::vector<PlannedPath> legs =
          multi_goal_path(tables.map(), leg_fields, last, goal_cells, tables.epsilon());
      double e = path_energy(prefix, tables.field(order[0]));
      bool ok = true;
      for (const PlannedPath& leg : legs) {
        if (!leg.reachable) {
          ok = false;
          break;
        }
        e += leg.energy;
      }
      std::vector<Cell> path(prefix.begin(), prefix.end());
      if (ok) {
        h.score = -params.model.lambda * e + seq_prior;
        for (int i = 0; i < k; ++i) {
          append_leg(path, legs[static_cast<size_t>(i)].cells);
          if (i + 1 < k)
            for (int d = 0; d < params.dwell; ++d) path.push_back(path.back());
        }
      }
      pad_to(path, horizon);
      out.hypotheses.push_back(std::move(h));
      paths.push_back(std::move(path));
    } while (std::next_permutation(order.begin(), order.end()));

    for (int a : goals)
      for (int b : goals) {
        if (a == b) continue;
        ChangeHypothesis ch = score_change_hypothesis(scene, tables, agent, a, b, params);
        ScoredHypothesis h;
        h.z = Behavior::kChange;
        h.goal_order = {a, b};
        h.switch_frame = ch.switch_frame;
        h.score = ch.log_lik;
        std::vector<Cell> path = ch.log_lik == kNegInf
                                     ? std::vector<Cell>(prefix.begin(), prefix.end())
                                     : std::move(ch.path);
        pad_to(path, horizon);
        out.hypotheses.push_back(std::move(h));
        paths.push_back(std::move(path));
      }
  }

  size_t best = 0;
  for (size_t i = 1; i < out.hypotheses.size(); ++i)
    if (out.hypotheses[i].score > out.hypotheses[best].score) best = i;
  if (out.hypotheses[best].score == kNegInf)
    throw PredictionError("every behavior hypothesis is impossible for agent " +
                          std::to_string(out.agent_id));
  out.best = out.hypotheses[best];
  out.path = std::move(paths[best]);
  return out;
}

std::vector<OfflinePrediction> predict_offline_all(const Scene& scene, const ChainSnapshot& state,
                                                   const PredictParams& params) {
  GoalTables tables(state.cmap, state.sources, params.field, params.epsilon);
  std::vector<OfflinePrediction> out;
  out.reserve(scene.agents.size());
  for (size_t i = 0; i < scene.agents.size(); ++i)
    out.push_back(predict_offline(scene, state, tables, static_cast<int>(i), params));
  return out;
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::kOutOfScene:
      return "out_of_scene";
    case StopReason::kAllGoalsVisited:
      return "all_goals_visited";
    case StopReason::kHorizon:
      return "horizon";
  }
  throw std::invalid_argument("unknown stop reason");
}

namespace {

// Relation prior under the uniform multinomial: every selection costs log N,
// so only the total selection count matters.
double relation_lp_from_counts(const std::vector<std::int64_t>& counts) {
  if (counts.empty()) return 0.0;
  double total = 0.0;
  for (std::int64_t c : counts) total += static_cast<double>(c);
  return -total * std::log(static_cast<double>(counts.size()));
}

}  // namespace

OnlinePrediction predict_online(const Scene& scene, const ChainSnapshot& state,
                                const GoalTables& tables, int agent, const PredictParams& params,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Trajectory& traj = scene.agents[static_cast<size_t>(agent)].traj;
  std::span<const Cell> prefix = traj.observed();
  const int horizon = traj.horizon;
  const int n = tables.count();
  const Lattice& lat = scene.lattice();

  OnlinePrediction out;
  out.agent_id = scene.agents[static_cast<size_t>(agent)].id;
  out.path.assign(prefix.begin(), prefix.end());
  if (static_cast<int>(out.path.size()) >= horizon) return out;  // reason horizon

  // Running per-source prefix energies over the simulated track; grown one
  // frame per step.
  std::vector<std::vector<double>> cum(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j)
    cum[static_cast<size_t>(j)] = path_energy_prefix(prefix, tables.field(j));

  std::vector<char> visited(static_cast<size_t>(n), 0);
  for (int j = 0; j < n; ++j)
    for (Cell c : prefix)
      if (c == tables.source(j).mu) visited[static_cast<size_t>(j)] = 1;

  // Relation row re-estimation works on selection counts; change-of-intent
  // hypotheses are excluded online.
  ModelParams no_change = params.model;
  no_change.gamma = 0.0;
  std::vector<char> row(static_cast<size_t>(n), 0);
  for (int g : state.rel.goals_of(agent)) row[static_cast<size_t>(g)] = 1;
  std::vector<std::int64_t> counts(static_cast<size_t>(n), 0);
  for (int i = 0; i < state.rel.n_agents(); ++i)
    for (int j = 0; j < n; ++j)
      if (state.rel.at(i, j)) ++counts[static_cast<size_t>(j)];

  auto row_goals = [&row]() {
    std::vector<int> out_goals;
    for (size_t j = 0; j < row.size(); ++j)
      if (row[j]) out_goals.push_back(static_cast<int>(j));
    return out_goals;
  };

  auto score_goals = [&](const std::vector<int>& goals, const Trajectory& sim) {
    if (goals.empty()) return kNegInf;
    std::vector<GoalView> views(goals.size());
    for (size_t p = 0; p < goals.size(); ++p) {
      int j = goals[p];
      views[p] = GoalView{&tables.togo(j), cum[static_cast<size_t>(j)].data(),
                          tables.source(j).mu};
    }
    return score_agent_views(sim, views, goals, n, no_change).score;
  };

  while (static_cast<int>(out.path.size()) < horizon) {
    Cell cur = out.path.back();

    std::vector<int> goals = row_goals();
    std::vector<int> remaining;
    for (int g : goals)
      if (!visited[static_cast<size_t>(g)]) remaining.push_back(g);
    if (remaining.empty()) {
      out.stop = StopReason::kAllGoalsVisited;
      return out;
    }

    // Re-estimate the relation row against the evidence so far.
    Trajectory sim;
    sim.cells = out.path;
    sim.t0 = static_cast<int>(out.path.size());
    sim.horizon = horizon;
    double cur_score = score_goals(goals, sim) + relation_lp_from_counts(counts);
    std::vector<std::int64_t> freq(static_cast<size_t>(n), 0);
    for (int sweep = 0; sweep < params.relation_sweeps; ++sweep) {
      std::vector<int> selected = row_goals();
      std::vector<int> unselected;
      for (int j = 0; j < n; ++j)
        if (!row[static_cast<size_t>(j)]) unselected.push_back(j);
      enum { kChangeGoal, kAddGoal, kRemoveGoal };
      std::vector<int> applicable;
      if (!selected.empty() && !unselected.empty()) applicable.push_back(kChangeGoal);
      if (static_cast<int>(selected.size()) < params.model.max_goals && !unselected.empty())
        applicable.push_back(kAddGoal);
      if (selected.size() > 1) applicable.push_back(kRemoveGoal);
      if (!applicable.empty()) {
        std::uniform_int_distribution<size_t> action_pick(0, applicable.size() - 1);
        int action = applicable[action_pick(rng)];
        auto pick_from = [&](const std::vector<int>& v) {
          std::uniform_int_distribution<size_t> d(0, v.size() - 1);
          return v[d(rng)];
        };
        int added = -1, removed = -1;
        if (action == kChangeGoal) {
          removed = pick_from(selected);
          added = pick_from(unselected);
        } else if (action == kAddGoal) {
          added = pick_from(unselected);
        } else {
          removed = pick_from(selected);
        }
        if (removed >= 0) {
          row[static_cast<size_t>(removed)] = 0;
          --counts[static_cast<size_t>(removed)];
        }
        if (added >= 0) {
          row[static_cast<size_t>(added)] = 1;
          ++counts[static_cast<size_t>(added)];
        }
        double cand_score = score_goals(row_goals(), sim) + relation_lp_from_counts(counts);
        double u = u01(rng);
        bool accept;
        if (cand_score == kNegInf)
          accept = false;
        else if (cur_score == kNegInf)
          accept = true;
        else
          accept = u < std::exp(cand_score - cur_score);
        if (accept) {
          cur_score = cand_score;
        } else {
          if (removed >= 0) {
            row[static_cast<size_t>(removed)] = 1;
            ++counts[static_cast<size_t>(removed)];
          }
          if (added >= 0) {
            row[static_cast<size_t>(added)] = 0;
            --counts[static_cast<size_t>(added)];
          }
        }
      }
      for (int j = 0; j < n; ++j)
        if (row[static_cast<size_t>(j)]) ++freq[static_cast<size_t>(j)];
    }
    std::vector<double> posterior(static_cast<size_t>(n), 0.0);
    if (params.relation_sweeps > 0) {
      for (int j = 0; j < n; ++j)
        posterior[static_cast<size_t>(j)] =
            static_cast<double>(freq[static_cast<size_t>(j)]) / params.relation_sweeps;
    } else {
      for (int j = 0; j < n; ++j) posterior[static_cast<size_t>(j)] = row[static_cast<size_t>(j)];
    }
    out.goal_posterior.push_back(std::move(posterior));

    goals = row_goals();
    remaining.clear();
    for (int g : goals)
      if (!visited[static_cast<size_t>(g)]) remaining.push_back(g);
    if (remaining.empty()) {
      out.stop = StopReason::kAllGoalsVisited;
      return out;
    }

    // Closest remaining goal by routing cost, Euclidean when unreachable.
    int target = remaining[0];
    int best_tier = 2;
    double best_val = kInf;
    for (int g : remaining) {
      double cost = tables.togo(g).cost_at(cur);
      int tier = cost == kInf ? 1 : 0;
      double val = tier == 0 ? cost : euclid(tables.source(g).mu, cur);
      if (tier < best_tier || (tier == best_tier && val < best_val)) {
        best_tier = tier;
        best_val = val;
        target = g;
      }
    }

    std::vector<Cell> cands = walkable_actions(tables.map(), cur);
    Cell next = cur;
    if (!cands.empty()) {
      Vec2 f = tables.field(target).at(cur);
      double fmag = std::sqrt(f.x * f.x + f.y * f.y);
      std::vector<double> w(cands.size(), 0.0);
      double total = 0.0;
      for (size_t c = 0; c < cands.size(); ++c) {
        double step = euclid(cands[c], cur);
        double togo_cost = tables.togo(target).cost_at(cands[c]);
        if (togo_cost == kInf) continue;
        w[c] = std::exp(-params.model.lambda * (fmag * step + togo_cost));
        total += w[c];
      }
      if (total > 0.0) {
        double mx = 0.0, my = 0.0;
        for (int s = 0; s < params.online_samples; ++s) {
          double u = u01(rng) * total;
          size_t c = 0;
          for (; c + 1 < cands.size(); ++c) {
            if (u < w[c]) break;
            u -= w[c];
          }
          mx += cands[c].x;
          my += cands[c].y;
        }
        mx /= params.online_samples;
        my /= params.online_samples;
        size_t best_c = 0;
        double best_d = kInf;
        for (size_t c = 0; c < cands.size(); ++c) {
          double dx = cands[c].x - mx, dy = cands[c].y - my;
          double d = dx * dx + dy * dy;
          if (d < best_d) {
            best_d = d;
            best_c = c;
          }
        }
        next = cands[best_c];
      }
    }

    out.path.push_back(next);
    for (int j = 0; j < n; ++j) {
      Vec2 fj = tables.field(j).at(cur);
      double dx = next.x - cur.x, dy = next.y - cur.y;
      cum[static_cast<size_t>(j)].push_back(cum[static_cast<size_t>(j)].back() +
                                            std::abs(fj.x * dx + fj.y * dy));
      if (next == tables.source(j).mu) visited[static_cast<size_t>(j)] = 1;
    }
    if (lat.on_boundary(next)) {
      out.stop = StopReason::kOutOfScene;
      return out;
    }
    bool all_done = true;
    for (int g : row_goals())
      if (!visited[static_cast<size_t>(g)]) all_done = false;
    if (all_done) {
      out.stop = StopReason::kAllGoalsVisited;
      return out;
    }
  }
  out.stop = StopReason::kHorizon;
  return out;
}

std::vector<OnlinePrediction> predict_online_all(const Scene& scene, const ChainSnapshot& state,
                                                 const PredictParams& params, std::uint64_t seed) {
  GoalTables tables(state.cmap, state.sources, params.field, params.epsilon);
  std::vector<OnlinePrediction> out;
  out.reserve(scene.agents.size());
  for (size_t i = 0; i < scene.agents.size(); ++i) {
    std::uint64_t agent_seed = seed + 0x9E3779B97F4A7C15ULL * (i + 1);
    out.push_back(predict_online(scene, state, tables, static_cast<int>(i), params, agent_seed));
  }
  return out;
}

}  // namespace lam
