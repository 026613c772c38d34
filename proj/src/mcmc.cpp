#include "lam/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "lam/kernels.hpp"

namespace lam {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

GoalTables::GoalTables(const ConstraintMap& cmap, std::vector<Source> sources,
                       FieldParams params, double epsilon)
    : sources_(std::move(sources)),
      cmap_(cmap),
      params_(params),
      epsilon_(epsilon),
      repulsion_(repulsion_field(cmap, params.sigma_r_sq)) {
  fields_.reserve(sources_.size());
  togos_.reserve(sources_.size());
  for (const Source& s : sources_) {
    VectorField att = attraction_field(cmap.lattice(), s.mu, params_.sigma_a_sq);
    VectorField f = sum_fields(att, repulsion_);
    togos_.push_back(cost_to_go_table(cmap, f, s.mu, epsilon_));
    fields_.push_back(std::move(f));
  }
}

AgentReport score_agent_views(const Trajectory& traj, std::span<const GoalView> views,
                              std::span<const int> goals, int n_sources,
                              const ModelParams& params) {
  AgentReport r;
  if (views.empty()) {
    r.score = kNegInf;
    return r;
  }
  std::span<const Cell> prefix = traj.observed();
  int t_end = static_cast<int>(prefix.size()) - 1;
  Cell start = prefix.front();
  Cell end = prefix.back();

  // Closest selected goal wins: routing cost from the spawn cell, Euclidean
  // when no route exists, first (lowest) index on ties.
  size_t pick = 0;
  int best_tier = 2;
  double best_val = kInf;
  for (size_t p = 0; p < views.size(); ++p) {
    double cost = views[p].togo->cost_at(start);
    int tier = cost == kInf ? 1 : 0;
    double val = tier == 0 ? cost : euclid(views[p].mu, start);
    if (tier < best_tier || (tier == best_tier && val < best_val)) {
      best_tier = tier;
      best_val = val;
      pick = p;
    }
  }

  r.z = Behavior::kSingle;
  r.goal_order = {goals[pick]};
  // Cheapest completion: field work spent over the prefix plus the optimal
  // remainder from the last observed cell (infinite when it cannot reach).
  double energy = views[pick].cum[t_end] + views[pick].togo->energy_at(end);
  double prior = behavior_log_prior(Behavior::kSingle, 1, params.kappa, params.gamma, n_sources);
  r.score = energy == kInf ? kNegInf : -params.lambda * energy + prior;
  return r;
}

AgentReport score_agent(const Trajectory& traj, const GoalTables& tables,
                        std::span<const int> goals, int n_sources, const ModelParams& params) {
  std::span<const Cell> prefix = traj.observed();
  std::vector<std::vector<double>> cums(goals.size());
  std::vector<GoalView> views(goals.size());
  for (size_t p = 0; p < goals.size(); ++p) {
    int j = goals[p];
    cums[p] = path_energy_prefix(prefix, tables.field(j));
    views[p] = GoalView{&tables.togo(j), cums[p].data(), tables.source(j).mu};
  }
  return score_agent_views(traj, views, goals, n_sources, params);
}

PosteriorBreakdown evaluate_posterior(const Scene& scene, const ConstraintMap& cmap,
                                      const std::vector<Source>& sources,
                                      const RelationMatrix& rel, const Gmm* gmm,
                                      const ModelParams& params, const FieldParams& field_params,
                                      double epsilon) {
  GoalTables tables(cmap, sources, field_params, epsilon);
  PosteriorBreakdown out;
  out.ising = ising_log_prior(cmap, params.beta);
  out.source = source_log_prior(sources, cmap, params.eta, params.rho);
  out.relation = relation_log_prior(rel, uniform_theta(static_cast<int>(sources.size())));
  const FeatureChannel* features = scene.features ? &*scene.features : nullptr;
  out.appearance = appearance_log_likelihood(cmap, features, gmm);

  double agents = 0.0;
  out.agents.reserve(scene.agents.size());
  for (size_t i = 0; i < scene.agents.size(); ++i) {
    const Trajectory& traj = scene.agents[i].traj;
    bool blocked = false;
    for (Cell c : traj.observed())
      if (!cmap.walkable(c)) {
        blocked = true;
        break;
      }
    std::vector<int> goals = rel.goals_of(static_cast<int>(i));
    AgentReport r;
    if (blocked || goals.empty()) {
      r.goal_order = goals;
      r.score = kNegInf;
    } else {
      r = score_agent(traj, tables, goals, tables.count(), params);
    }
    agents += r.score;
    out.agents.push_back(std::move(r));
  }
  out.total = out.ising + out.source + out.relation + out.appearance + agents;
  return out;
}

Chain::Chain(const Scene& scene, ModelParams params, ChainConfig config)
    : scene_(&scene), params_(std::move(params)), config_(std::move(config)), rng_(config_.seed) {
  if (scene_->agents.empty()) throw InputError("scene has no observed trajectories");
  if (config_.iterations < 0 || config_.burn_in < 0)
    throw std::invalid_argument("iteration counts must be non-negative");
  int wsum = 0;
  for (int w : config_.proposal_weights) {
    if (w < 0) throw std::invalid_argument("proposal weights must be non-negative");
    wsum += w;
  }
  if (wsum == 0) throw std::invalid_argument("proposal weights must not all be zero");
  if (!(config_.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(config_.source_sigma > 0.0)) throw std::invalid_argument("source sigma must be positive");
  if (config_.stop_frames < 1) throw std::invalid_argument("stop_frames must be at least 1");
  require_valid(*scene_);
  initialize();
}

// Stopping locations: maximal runs of below-threshold speed, plus every
// agent's last observed cell (exit candidates). Sorted by event count, then
// by earliest event, then by cell index.
std::vector<int> Chain::stop_candidate_cells() const {
  const Lattice& lat = scene_->lattice();
  const int size = lat.size();
  std::vector<std::int64_t> stop_count(static_cast<size_t>(size), 0);
  std::vector<int> first_time(static_cast<size_t>(size), std::numeric_limits<int>::max());
  auto add_event = [&](int idx, int t) {
    ++stop_count[static_cast<size_t>(idx)];
    first_time[static_cast<size_t>(idx)] = std::min(first_time[static_cast<size_t>(idx)], t);
  };
  for (const Agent& ag : scene_->agents) {
    std::span<const Cell> obs = ag.traj.observed();
    if (obs.empty()) continue;
    std::vector<double> speed(obs.size(), 0.0);
    for (size_t t = 0; t < obs.size(); ++t) {
      if (t + 1 < obs.size())
        speed[t] = euclid(obs[t], obs[t + 1]);
      else if (t > 0)
        speed[t] = euclid(obs[t - 1], obs[t]);
    }
    size_t t = 0;
    while (t < obs.size()) {
      if (speed[t] >= config_.stop_speed) {
        ++t;
        continue;
      }
      size_t r = t;
      while (r + 1 < obs.size() && speed[r + 1] < config_.stop_speed) ++r;
      if (static_cast<int>(r - t + 1) >= config_.stop_frames)
        add_event(lat.index(obs[t]), static_cast<int>(t));
      t = r + 1;
    }
    add_event(lat.index(obs.back()), static_cast<int>(obs.size()) - 1);
  }
  std::vector<int> candidates;
  for (int i = 0; i < size; ++i)
    if (stop_count[static_cast<size_t>(i)] > 0) candidates.push_back(i);
  std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    if (stop_count[static_cast<size_t>(a)] != stop_count[static_cast<size_t>(b)])
      return stop_count[static_cast<size_t>(a)] > stop_count[static_cast<size_t>(b)];
    if (first_time[static_cast<size_t>(a)] != first_time[static_cast<size_t>(b)])
      return first_time[static_cast<size_t>(a)] < first_time[static_cast<size_t>(b)];
    return a < b;
  });
  return candidates;
}

void Chain::initialize() {
  const Lattice& lat = scene_->lattice();
  const int size = lat.size();
  const int n_agents = static_cast<int>(scene_->agents.size());

  // Observed coverage and per-cell speed statistics drive both the
  // walkability gate and the data-driven flip proposal.
  coverage_.assign(static_cast<size_t>(size), 0);
  std::vector<double> speed_sum(static_cast<size_t>(size), 0.0);
  std::vector<std::int64_t> visit_count(static_cast<size_t>(size), 0);
  for (const Agent& ag : scene_->agents) {
    std::span<const Cell> obs = ag.traj.observed();
    for (size_t t = 0; t < obs.size(); ++t) {
      int idx = lat.index(obs[t]);
      ++coverage_[static_cast<size_t>(idx)];
      double sp = 0.0;
      if (t + 1 < obs.size())
        sp = euclid(obs[t], obs[t + 1]);
      else if (t > 0)
        sp = euclid(obs[t - 1], obs[t]);
      speed_sum[static_cast<size_t>(idx)] += sp;
      ++visit_count[static_cast<size_t>(idx)];
    }
  }
  q_plus_.assign(static_cast<size_t>(size), 0.1);
  double max_mean = 0.0;
  for (int i = 0; i < size; ++i)
    if (visit_count[static_cast<size_t>(i)] > 0)
      max_mean = std::max(max_mean, speed_sum[static_cast<size_t>(i)] /
                                        static_cast<double>(visit_count[static_cast<size_t>(i)]));
  for (int i = 0; i < size; ++i)
    if (visit_count[static_cast<size_t>(i)] > 0) {
      double mean = speed_sum[static_cast<size_t>(i)] /
                    static_cast<double>(visit_count[static_cast<size_t>(i)]);
      q_plus_[static_cast<size_t>(i)] = max_mean > 0.0 ? mean / max_mean : 0.0;
    }

  // Observed cells start walkable, everything else is a fair coin.
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  cmap_ = ConstraintMap(lat, 1);
  for (int i = 0; i < size; ++i) {
    if (coverage_[static_cast<size_t>(i)] > 0) continue;
    if (u01(rng_) < 0.5) cmap_.set(lat.cell(i), -1);
  }

  std::poisson_distribution<int> pois(params_.eta);
  int n_init = std::max(1, pois(rng_));

  std::vector<int> candidates = stop_candidate_cells();
  if (static_cast<int>(candidates.size()) > n_init) candidates.resize(static_cast<size_t>(n_init));
  while (static_cast<int>(candidates.size()) < n_init) {
    // Pad with uniform unchosen walkable cells; give up gracefully when the
    // map has none left.
    std::vector<int> pool;
    for (int i = 0; i < size; ++i) {
      if (!cmap_.walkable(lat.cell(i))) continue;
      if (std::find(candidates.begin(), candidates.end(), i) != candidates.end()) continue;
      pool.push_back(i);
    }
    if (pool.empty()) {
      if (candidates.empty()) candidates.push_back(0);
      else candidates.push_back(candidates.back());
    } else {
      std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
      candidates.push_back(pool[pick(rng_)]);
    }
  }
  double s2 = config_.source_sigma * config_.source_sigma;
  sources_.clear();
  for (int idx : candidates) sources_.push_back(Source{lat.cell(idx), s2, 0.0, s2});

  rel_ = RelationMatrix(n_agents, n_init);
  std::uniform_int_distribution<int> goal_pick(0, n_init - 1);
  for (int i = 0; i < n_agents; ++i) rel_.set(i, goal_pick(rng_), true);
  theta_ = fit_theta(rel_);

  if (scene_->features) {
    gmm_ = fit_gmm(cmap_, *scene_->features);
    cell_log_density_.resize(static_cast<size_t>(size));
    for (int i = 0; i < size; ++i)
      cell_log_density_[static_cast<size_t>(i)] =
          gmm_log_density(*gmm_, scene_->features->color[static_cast<size_t>(i)]);
  }

  repulsion_ = repulsion_field(cmap_, config_.field.sigma_r_sq);
  repulsion_active_ = repulsion_cutoff(config_.field.sigma_r_sq) > 1;
  caches_.clear();
  for (const Source& s : sources_) caches_.push_back(build_cache(s));

  ising_bonds_ = kernels::ising_bond_sum(cmap_.labels().data(), lat.width(), lat.height());
  source_lp_ = source_log_prior(sources_, cmap_, params_.eta, params_.rho);
  relation_lp_ = relation_log_prior(rel_, uniform_theta(n_init));
  appearance_ll_ = 0.0;
  if (gmm_) {
    for (int i = 0; i < size; ++i)
      if (cmap_.walkable(lat.cell(i))) appearance_ll_ += cell_log_density_[static_cast<size_t>(i)];
  }

  std::vector<const SourceCache*> view = cache_ptrs();
  reports_.resize(static_cast<size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i)
    reports_[static_cast<size_t>(i)] =
        score_cached(i, rel_, static_cast<int>(sources_.size()), view, {});
  agents_score_ = 0.0;
  for (const AgentReport& r : reports_) agents_score_ += r.score;
  recompose_log_post();
}

std::unique_ptr<Chain::SourceCache> Chain::build_cache(const Source& s) const {
  auto c = std::make_unique<SourceCache>();
  c->mu = s.mu;
  c->attraction = attraction_field(scene_->lattice(), s.mu, config_.field.sigma_a_sq);
  c->field = repulsion_active_ ? sum_fields(c->attraction, repulsion_) : c->attraction;
  c->togo = cost_to_go_table(cmap_, c->field, s.mu, config_.epsilon);
  c->cum.resize(scene_->agents.size());
  for (size_t i = 0; i < scene_->agents.size(); ++i)
    c->cum[i] = path_energy_prefix(scene_->agents[i].traj.observed(), c->field);
  return c;
}

AgentReport Chain::score_cached(int agent, const RelationMatrix& rel, int n_sources,
                                std::span<const SourceCache* const> caches,
                                std::span<const CostToGo* const> togo_override) const {
  std::vector<int> goals = rel.goals_of(agent);
  if (goals.empty()) {
    AgentReport r;
    r.score = kNegInf;
    return r;
  }
  std::vector<GoalView> views(goals.size());
  for (size_t p = 0; p < goals.size(); ++p) {
    int j = goals[p];
    const SourceCache* c = caches[static_cast<size_t>(j)];
    const CostToGo* togo = togo_override.empty() ? &c->togo : togo_override[static_cast<size_t>(j)];
    views[p] = GoalView{togo, c->cum[static_cast<size_t>(agent)].data(), c->mu};
  }
  return score_agent_views(scene_->agents[static_cast<size_t>(agent)].traj, views, goals,
                           n_sources, params_);
}

std::vector<const Chain::SourceCache*> Chain::cache_ptrs() const {
  std::vector<const SourceCache*> out;
  out.reserve(caches_.size());
  for (const auto& c : caches_) out.push_back(c.get());
  return out;
}

void Chain::recompose_log_post() {
  ising_lp_ = params_.beta * static_cast<double>(ising_bonds_);
  log_post_ = ising_lp_ + source_lp_ + relation_lp_ + appearance_ll_ + agents_score_;
}

bool Chain::accept_move(double log_q_ratio, double candidate_lp) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double u = u01(rng_);
  if (candidate_lp == kNegInf) return false;
  if (log_post_ == kNegInf) return true;
  double log_alpha = log_q_ratio + candidate_lp - log_post_;
  return u < std::exp(log_alpha);
}

double Chain::flip_walkable_probability(Cell c) const {
  return q_plus_[static_cast<size_t>(scene_->lattice().index(c))];
}

void Chain::propose_flip() {
  ++stats_.proposed[0];
  const Lattice& lat = scene_->lattice();
  std::uniform_int_distribution<int> cell_pick(0, lat.size() - 1);
  int idx = cell_pick(rng_);
  Cell c = lat.cell(idx);
  double q = q_plus_[static_cast<size_t>(idx)];
  int cur = cmap_.at(c);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int prop = u01(rng_) < q ? 1 : -1;
  if (prop == cur) {
    // Identity proposal: acceptance ratio is exactly 1.
    if (accept_move(0.0, log_post_)) ++stats_.accepted[0];
    return;
  }
  double q_fwd = prop > 0 ? q : 1.0 - q;
  double q_rev = cur > 0 ? q : 1.0 - q;
  double log_q_ratio = std::log(q_rev) - std::log(q_fwd);

  // An observed cell can never become non-walkable: the trajectory
  // likelihood is -infinity there, so skip the table rebuilds.
  if (prop < 0 && coverage_[static_cast<size_t>(idx)] > 0) {
    accept_move(log_q_ratio, kNegInf);
    return;
  }

  int nsum = 0;
  const Cell nbs[4] = {{c.x - 1, c.y}, {c.x + 1, c.y}, {c.x, c.y - 1}, {c.x, c.y + 1}};
  for (const Cell& n : nbs)
    if (lat.contains(n)) nsum += cmap_.at(n);
  std::int64_t d_bonds = -2LL * cur * nsum;

  double d_app = 0.0;
  if (gmm_) d_app = (prop > 0 ? 1.0 : -1.0) * cell_log_density_[static_cast<size_t>(idx)];
  double d_src = 0.0;
  double walk_gain = std::log(params_.rho) - std::log(1.0 - params_.rho);
  for (const Source& s : sources_)
    if (s.mu == c) d_src += prop > 0 ? walk_gain : -walk_gain;

  cmap_.flip(c);

  const int n_sources = static_cast<int>(sources_.size());
  const int n_agents = static_cast<int>(scene_->agents.size());
  std::vector<std::unique_ptr<SourceCache>> heavy;
  VectorField old_repulsion;
  std::vector<CostToGo> cand_togo;
  std::vector<const CostToGo*> override_ptrs;
  std::vector<const SourceCache*> view;
  if (repulsion_active_) {
    // Obstacle set changed, so the shared repulsion and every combined field,
    // cumulative-energy array and routing table must be rebuilt.
    old_repulsion = std::move(repulsion_);
    repulsion_ = repulsion_field(cmap_, config_.field.sigma_r_sq);
    heavy.reserve(static_cast<size_t>(n_sources));
    for (const Source& s : sources_) heavy.push_back(build_cache(s));
    view.reserve(static_cast<size_t>(n_sources));
    for (const auto& h : heavy) view.push_back(h.get());
  } else {
    cand_togo.reserve(static_cast<size_t>(n_sources));
    for (int j = 0; j < n_sources; ++j)
      cand_togo.push_back(
          cost_to_go_table(cmap_, caches_[static_cast<size_t>(j)]->field, sources_[static_cast<size_t>(j)].mu,
                           config_.epsilon));
    override_ptrs.reserve(static_cast<size_t>(n_sources));
    for (int j = 0; j < n_sources; ++j) override_ptrs.push_back(&cand_togo[static_cast<size_t>(j)]);
    view = cache_ptrs();
  }

  std::vector<AgentReport> cand_reports(static_cast<size_t>(n_agents));
  double cand_scores = 0.0;
  for (int i = 0; i < n_agents; ++i) {
    cand_reports[static_cast<size_t>(i)] = score_cached(
        i, rel_, n_sources, view,
        repulsion_active_ ? std::span<const CostToGo* const>{} : std::span<const CostToGo* const>(override_ptrs));
    cand_scores += cand_reports[static_cast<size_t>(i)].score;
  }
  double cand_lp = params_.beta * static_cast<double>(ising_bonds_ + d_bonds) +
                   (source_lp_ + d_src) + relation_lp_ + (appearance_ll_ + d_app) + cand_scores;

  if (accept_move(log_q_ratio, cand_lp)) {
    ising_bonds_ += d_bonds;
    source_lp_ += d_src;
    appearance_ll_ += d_app;
    if (repulsion_active_) {
      caches_ = std::move(heavy);
    } else {
      for (int j = 0; j < n_sources; ++j)
        caches_[static_cast<size_t>(j)]->togo = std::move(cand_togo[static_cast<size_t>(j)]);
    }
    reports_ = std::move(cand_reports);
    agents_score_ = 0.0;
    for (const AgentReport& r : reports_) agents_score_ += r.score;
    recompose_log_post();
    ++stats_.accepted[0];
  } else {
    cmap_.flip(c);
    if (repulsion_active_) repulsion_ = std::move(old_repulsion);
  }
}

Cell Chain::sample_walkable_cell(bool& ok) {
  const Lattice& lat = scene_->lattice();
  std::int64_t count = cmap_.walkable_count();
  if (count == 0) {
    ok = false;
    return Cell{};
  }
  std::uniform_int_distribution<std::int64_t> pick(0, count - 1);
  std::int64_t k = pick(rng_);
  for (int i = 0; i < lat.size(); ++i) {
    if (!cmap_.walkable(lat.cell(i))) continue;
    if (k == 0) {
      ok = true;
      return lat.cell(i);
    }
    --k;
  }
  ok = false;
  return Cell{};
}

void Chain::propose_birth_death() {
  ++stats_.proposed[1];
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n_sources = static_cast<int>(sources_.size());
  const int n_agents = static_cast<int>(scene_->agents.size());
  bool birth = u01(rng_) < 0.5;

  if (birth) {
    bool ok = false;
    Cell c = sample_walkable_cell(ok);
    if (!ok) {
      accept_move(0.0, kNegInf);
      return;
    }
    double s2 = config_.source_sigma * config_.source_sigma;
    Source s{c, s2, 0.0, s2};
    std::unique_ptr<SourceCache> cand_cache = build_cache(s);
    std::vector<Source> cand_sources = sources_;
    cand_sources.push_back(s);
    RelationMatrix cand_rel = rel_;
    cand_rel.insert_source_column();
    std::vector<double> cand_theta = fit_theta(cand_rel);
    double cand_source_lp = source_log_prior(cand_sources, cmap_, params_.eta, params_.rho);
    double cand_relation_lp = relation_log_prior(cand_rel, uniform_theta(n_sources + 1));
    std::vector<const SourceCache*> view = cache_ptrs();
    view.push_back(cand_cache.get());
    std::vector<AgentReport> cand_reports(static_cast<size_t>(n_agents));
    double cand_scores = 0.0;
    for (int i = 0; i < n_agents; ++i) {
      cand_reports[static_cast<size_t>(i)] = score_cached(i, cand_rel, n_sources + 1, view, {});
      cand_scores += cand_reports[static_cast<size_t>(i)].score;
    }
    double cand_lp = ising_lp_ + cand_source_lp + cand_relation_lp + appearance_ll_ + cand_scores;
    if (accept_move(0.0, cand_lp)) {
      sources_ = std::move(cand_sources);
      caches_.push_back(std::move(cand_cache));
      rel_ = std::move(cand_rel);
      theta_ = std::move(cand_theta);
      source_lp_ = cand_source_lp;
      relation_lp_ = cand_relation_lp;
      reports_ = std::move(cand_reports);
      agents_score_ = cand_scores;
      recompose_log_post();
      ++stats_.accepted[1];
    }
    return;
  }

  // Death. A lone source cannot die while agents need a goal.
  if (n_sources == 0 || (n_sources == 1 && n_agents > 0)) {
    accept_move(0.0, kNegInf);
    return;
  }
  std::uniform_int_distribution<int> pick(0, n_sources - 1);
  int victim = pick(rng_);
  RelationMatrix cand_rel = rel_;
  for (int i = 0; i < n_agents; ++i) {
    if (!cand_rel.at(i, victim)) continue;
    cand_rel.set(i, victim, false);
    if (cand_rel.goal_count(i) > 0) continue;
    // Orphaned agent: reassign to the nearest surviving source by routing
    // cost from its last observed cell, Euclidean when unreachable.
    Cell end = scene_->agents[static_cast<size_t>(i)].traj.last_observed();
    int best = -1;
    int best_tier = 2;
    double best_val = kInf;
    for (int j = 0; j < n_sources; ++j) {
      if (j == victim) continue;
      double cost = caches_[static_cast<size_t>(j)]->togo.cost_at(end);
      int tier = cost == kInf ? 1 : 0;
      double val = tier == 0 ? cost : euclid(sources_[static_cast<size_t>(j)].mu, end);
      if (tier < best_tier || (tier == best_tier && val < best_val)) {
        best_tier = tier;
        best_val = val;
        best = j;
      }
    }
    cand_rel.set(i, best, true);
  }
  cand_rel.erase_source_column(victim);
  std::vector<Source> cand_sources = sources_;
  cand_sources.erase(cand_sources.begin() + victim);
  std::vector<double> cand_theta = fit_theta(cand_rel);
  double cand_source_lp = source_log_prior(cand_sources, cmap_, params_.eta, params_.rho);
  double cand_relation_lp = relation_log_prior(cand_rel, uniform_theta(n_sources - 1));
  std::vector<const SourceCache*> view;
  view.reserve(static_cast<size_t>(n_sources) - 1);
  for (int j = 0; j < n_sources; ++j)
    if (j != victim) view.push_back(caches_[static_cast<size_t>(j)].get());
  std::vector<AgentReport> cand_reports(static_cast<size_t>(n_agents));
  double cand_scores = 0.0;
  for (int i = 0; i < n_agents; ++i) {
    cand_reports[static_cast<size_t>(i)] = score_cached(i, cand_rel, n_sources - 1, view, {});
    cand_scores += cand_reports[static_cast<size_t>(i)].score;
  }
  double cand_lp = ising_lp_ + cand_source_lp + cand_relation_lp + appearance_ll_ + cand_scores;
  if (accept_move(0.0, cand_lp)) {
    sources_ = std::move(cand_sources);
    caches_.erase(caches_.begin() + victim);
    rel_ = std::move(cand_rel);
    theta_ = std::move(cand_theta);
    source_lp_ = cand_source_lp;
    relation_lp_ = cand_relation_lp;
    reports_ = std::move(cand_reports);
    agents_score_ = cand_scores;
    recompose_log_post();
    ++stats_.accepted[1];
  }
}

void Chain::propose_relation() {
  ++stats_.proposed[2];
  const int n_agents = static_cast<int>(scene_->agents.size());
  const int n_sources = static_cast<int>(sources_.size());
  if (n_agents == 0 || n_sources == 0) {
    accept_move(0.0, kNegInf);
    return;
  }
  std::uniform_int_distribution<int> agent_pick(0, n_agents - 1);
  int i = agent_pick(rng_);
  std::vector<int> selected = rel_.goals_of(i);
  std::vector<int> unselected;
  for (int j = 0; j < n_sources; ++j)
    if (!rel_.at(i, j)) unselected.push_back(j);

  enum { kChangeGoal, kAddGoal, kRemoveGoal };
  std::vector<int> applicable;
  if (!selected.empty() && !unselected.empty()) applicable.push_back(kChangeGoal);
  if (static_cast<int>(selected.size()) < params_.max_goals && !unselected.empty())
    applicable.push_back(kAddGoal);
  if (selected.size() > 1) applicable.push_back(kRemoveGoal);
  if (applicable.empty()) {
    accept_move(0.0, kNegInf);
    return;
  }
  std::uniform_int_distribution<size_t> action_pick(0, applicable.size() - 1);
  int action = applicable[action_pick(rng_)];

  RelationMatrix cand_rel = rel_;
  auto pick_from = [&](const std::vector<int>& v) {
    std::uniform_int_distribution<size_t> d(0, v.size() - 1);
    return v[d(rng_)];
  };
  switch (action) {
    case kChangeGoal:
      cand_rel.set(i, pick_from(selected), false);
      cand_rel.set(i, pick_from(unselected), true);
      break;
    case kAddGoal:
      cand_rel.set(i, pick_from(unselected), true);
      break;
    case kRemoveGoal:
      cand_rel.set(i, pick_from(selected), false);
      break;
  }
  std::vector<double> cand_theta = fit_theta(cand_rel);
  double cand_relation_lp = relation_log_prior(cand_rel, uniform_theta(n_sources));
  AgentReport cand_report = score_cached(i, cand_rel, n_sources, cache_ptrs(), {});
  double cand_scores = 0.0;
  for (int a = 0; a < n_agents; ++a)
    cand_scores += a == i ? cand_report.score : reports_[static_cast<size_t>(a)].score;
  double cand_lp = ising_lp_ + source_lp_ + cand_relation_lp + appearance_ll_ + cand_scores;
  if (accept_move(0.0, cand_lp)) {
    rel_ = std::move(cand_rel);
    theta_ = std::move(cand_theta);
    relation_lp_ = cand_relation_lp;
    reports_[static_cast<size_t>(i)] = std::move(cand_report);
    agents_score_ = cand_scores;
    recompose_log_post();
    ++stats_.accepted[2];
  }
}

void Chain::refit_appearance() {
  if (!gmm_) return;
  const Lattice& lat = scene_->lattice();
  gmm_ = fit_gmm(cmap_, *scene_->features);
  appearance_ll_ = 0.0;
  for (int i = 0; i < lat.size(); ++i) {
    cell_log_density_[static_cast<size_t>(i)] =
        gmm_log_density(*gmm_, scene_->features->color[static_cast<size_t>(i)]);
    if (cmap_.walkable(lat.cell(i))) appearance_ll_ += cell_log_density_[static_cast<size_t>(i)];
  }
  recompose_log_post();
}

void Chain::step() {
  int wsum = config_.proposal_weights[0] + config_.proposal_weights[1] + config_.proposal_weights[2];
  std::uniform_int_distribution<int> pick(0, wsum - 1);
  int r = pick(rng_);
  if (r < config_.proposal_weights[0])
    propose_flip();
  else if (r < config_.proposal_weights[0] + config_.proposal_weights[1])
    propose_birth_death();
  else
    propose_relation();
  ++iteration_;
}

ChainSnapshot Chain::snapshot() const {
  ChainSnapshot s;
  s.cmap = cmap_;
  s.sources = sources_;
  s.rel = rel_;
  s.theta = theta_;
  s.gmm = gmm_;
  s.agents = reports_;
  s.log_post = log_post_;
  return s;
}

double Chain::audit() const {
  for (int i = 0; i < rel_.n_agents(); ++i) {
    int g = rel_.goal_count(i);
    if (g < 1) throw std::logic_error("audit: agent lost all goals");
    if (g > params_.max_goals) throw std::logic_error("audit: agent exceeds goal cap");
  }
  std::vector<double> theta_check = fit_theta(rel_);
  for (size_t j = 0; j < theta_.size(); ++j)
    if (std::abs(theta_check[j] - theta_[j]) > 1e-12)
      throw std::logic_error("audit: theta out of sync with relations");

  PosteriorBreakdown full =
      evaluate_posterior(*scene_, cmap_, sources_, rel_, gmm_ ? &*gmm_ : nullptr, params_,
                         config_.field, config_.epsilon);
  double drift;
  if (log_post_ == kNegInf && full.total == kNegInf)
    drift = 0.0;
  else
    drift = std::abs(log_post_ - full.total);
  if (!(drift <= kAuditTolerance))
    throw std::logic_error("audit: cached log posterior drifted by " + std::to_string(drift));
  return drift;
}

void Chain::polish(ChainSnapshot& snap) const {
  const int n_agents = static_cast<int>(scene_->agents.size());
  if (snap.sources.empty() || n_agents == 0) return;
  const Lattice& lat = scene_->lattice();

  VectorField rep = repulsion_field(snap.cmap, config_.field.sigma_r_sq);
  const bool rep_active = repulsion_cutoff(config_.field.sigma_r_sq) > 1;

  std::vector<char> blocked(static_cast<size_t>(n_agents), 0);
  for (int i = 0; i < n_agents; ++i)
    for (Cell c : scene_->agents[static_cast<size_t>(i)].traj.observed())
      if (!snap.cmap.walkable(c)) {
        blocked[static_cast<size_t>(i)] = 1;
        break;
      }

  // Per candidate source position: completion energy of every agent's prefix
  // (field work spent plus optimal remainder from the last observed cell).
  struct Local {
    Cell mu;
    std::vector<double> energy;
  };
  auto build_local = [&](Cell mu) {
    Local loc;
    loc.mu = mu;
    VectorField att = attraction_field(lat, mu, config_.field.sigma_a_sq);
    VectorField f = rep_active ? sum_fields(att, rep) : std::move(att);
    CostToGo togo = cost_to_go_table(snap.cmap, f, mu, config_.epsilon);
    loc.energy.resize(static_cast<size_t>(n_agents), kInf);
    for (int i = 0; i < n_agents; ++i) {
      if (blocked[static_cast<size_t>(i)]) continue;
      std::span<const Cell> obs = scene_->agents[static_cast<size_t>(i)].traj.observed();
      loc.energy[static_cast<size_t>(i)] = path_energy(obs, f) + togo.energy_at(obs.back());
    }
    return loc;
  };

  std::vector<Source> srcs = snap.sources;
  std::vector<Local> locals;
  locals.reserve(srcs.size());
  for (const Source& s : srcs) locals.push_back(build_local(s.mu));

  const double single_prior =
      behavior_log_prior(Behavior::kSingle, 1, params_.kappa, params_.gamma,
                         static_cast<int>(srcs.size()));
  const double ising = params_.beta * static_cast<double>(kernels::ising_bond_sum(
                                          snap.cmap.labels().data(), lat.width(), lat.height()));
  const FeatureChannel* features = scene_->features ? &*scene_->features : nullptr;
  const double app = appearance_log_likelihood(snap.cmap, features, snap.gmm ? &*snap.gmm : nullptr);

  // Cheapest-completion singleton per agent, Euclidean fallback for rows that
  // cannot reach anything (their score is -infinity either way).
  auto assign = [&](const std::vector<Local>& ls, std::vector<int>& goal) {
    const int m = static_cast<int>(ls.size());
    goal.assign(static_cast<size_t>(n_agents), 0);
    double total = 0.0;
    for (int i = 0; i < n_agents; ++i) {
      int best = -1;
      double best_e = kInf;
      for (int j = 0; j < m; ++j) {
        double e = ls[static_cast<size_t>(j)].energy[static_cast<size_t>(i)];
        if (e < best_e) {
          best_e = e;
          best = j;
        }
      }
      if (best < 0) {
        Cell end = scene_->agents[static_cast<size_t>(i)].traj.last_observed();
        best = 0;
        double best_d = kInf;
        for (int j = 0; j < m; ++j) {
          double d = euclid(ls[static_cast<size_t>(j)].mu, end);
          if (d < best_d) {
            best_d = d;
            best = j;
          }
        }
        total = kNegInf;
      } else if (total != kNegInf) {
        total += -params_.lambda * best_e + single_prior;
      }
      goal[static_cast<size_t>(i)] = best;
    }
    return total;
  };

  auto compose = [&](const std::vector<Source>& ss, const std::vector<int>& goal,
                     double agents_total) {
    const int m = static_cast<int>(ss.size());
    RelationMatrix rel(n_agents, m);
    for (int i = 0; i < n_agents; ++i) rel.set(i, goal[static_cast<size_t>(i)], true);
    double rp = relation_log_prior(rel, uniform_theta(m));
    double sp = source_log_prior(ss, snap.cmap, params_.eta, params_.rho);
    return ising + sp + rp + app + agents_total;
  };

  auto total_of = [&](const std::vector<Local>& ls, const std::vector<Source>& ss) {
    std::vector<int> goal;
    double agents_total = assign(ls, goal);
    return compose(ss, goal, agents_total);
  };

  double best_total = total_of(locals, srcs);

  std::vector<int> birth_cells = stop_candidate_cells();
  if (birth_cells.size() > 32) birth_cells.resize(32);
  const double s2 = config_.source_sigma * config_.source_sigma;

  const int radius = std::max(0, config_.polish_radius);
  bool improved = true;
  for (int round = 0; improved && round < 16; ++round) {
    improved = false;

    for (size_t j = 0; j < srcs.size(); ++j) {
      Cell cur = srcs[j].mu;
      Cell best_cell = cur;
      std::optional<Local> best_local;
      double best_move = best_total;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx == 0 && dy == 0) continue;
          Cell c{cur.x + dx, cur.y + dy};
          if (!lat.contains(c) || !snap.cmap.walkable(c)) continue;
          Local cand = build_local(c);
          std::swap(locals[j], cand);
          std::vector<Source> ss = srcs;
          ss[j].mu = c;
          double tot = total_of(locals, ss);
          std::swap(locals[j], cand);
          if (tot > best_move) {
            best_move = tot;
            best_cell = c;
            best_local = std::move(cand);
          }
        }
      if (best_local) {
        srcs[j].mu = best_cell;
        locals[j] = std::move(*best_local);
        best_total = best_move;
        improved = true;
      }
    }

    // Drop the source whose removal helps most, when any removal helps.
    if (srcs.size() > 1) {
      int best_j = -1;
      double best_drop = best_total;
      for (size_t j = 0; j < srcs.size(); ++j) {
        std::vector<Source> ss = srcs;
        std::vector<Local> ls = locals;
        ss.erase(ss.begin() + static_cast<std::ptrdiff_t>(j));
        ls.erase(ls.begin() + static_cast<std::ptrdiff_t>(j));
        double tot = total_of(ls, ss);
        if (tot > best_drop) {
          best_drop = tot;
          best_j = static_cast<int>(j);
        }
      }
      if (best_j >= 0) {
        srcs.erase(srcs.begin() + best_j);
        locals.erase(locals.begin() + best_j);
        best_total = best_drop;
        improved = true;
      }
    }

    // Seed a new source at the best stopping cell, when any addition helps.
    {
      int best_cell = -1;
      double best_birth = best_total;
      std::optional<Local> best_local;
      for (int ci : birth_cells) {
        Cell c = lat.cell(ci);
        if (!snap.cmap.walkable(c)) continue;
        bool taken = false;
        for (const Source& s : srcs)
          if (s.mu == c) {
            taken = true;
            break;
          }
        if (taken) continue;
        Local cand = build_local(c);
        srcs.push_back(Source{c, s2, 0.0, s2});
        locals.push_back(std::move(cand));
        double tot = total_of(locals, srcs);
        if (tot > best_birth) {
          best_birth = tot;
          best_cell = ci;
          best_local = std::move(locals.back());
        }
        srcs.pop_back();
        locals.pop_back();
      }
      if (best_cell >= 0) {
        srcs.push_back(Source{lat.cell(best_cell), s2, 0.0, s2});
        locals.push_back(std::move(*best_local));
        best_total = best_birth;
        improved = true;
      }
    }
  }

  if (best_total <= snap.log_post) return;
  const int m = static_cast<int>(srcs.size());
  std::vector<int> goal;
  double agents_total = assign(locals, goal);
  RelationMatrix rel(n_agents, m);
  std::vector<AgentReport> reports(static_cast<size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    int j = goal[static_cast<size_t>(i)];
    rel.set(i, j, true);
    AgentReport& r = reports[static_cast<size_t>(i)];
    r.z = Behavior::kSingle;
    r.goal_order = {j};
    double e = locals[static_cast<size_t>(j)].energy[static_cast<size_t>(i)];
    r.score = e == kInf ? kNegInf : -params_.lambda * e + single_prior;
  }
  snap.log_post = compose(srcs, goal, agents_total);
  snap.sources = std::move(srcs);
  snap.theta = fit_theta(rel);
  snap.rel = std::move(rel);
  snap.agents = std::move(reports);
}

McmcResult Chain::run() {
  McmcResult res;
  res.map_state = snapshot();
  double best_lp = config_.burn_in == 0 ? log_post_ : kNegInf;
  res.trace.push_back(TraceRow{0, log_post_, static_cast<int>(sources_.size()), 0.0, 0.0, 0.0});

  for (std::int64_t it = 1; it <= config_.iterations; ++it) {
    step();
    if (gmm_ && config_.gmm_refit_period > 0 && it % config_.gmm_refit_period == 0)
      refit_appearance();
    if (it >= config_.burn_in && log_post_ > best_lp) {
      best_lp = log_post_;
      res.map_state = snapshot();
    }
    if ((config_.trace_period > 0 && it % config_.trace_period == 0) || it == config_.iterations)
      res.trace.push_back(TraceRow{it, log_post_, static_cast<int>(sources_.size()),
                                   stats_.acceptance_rate(MoveType::kFlip),
                                   stats_.acceptance_rate(MoveType::kBirthDeath),
                                   stats_.acceptance_rate(MoveType::kRelation)});
    if (config_.audit_period > 0 && it % config_.audit_period == 0)
      res.max_audit_drift = std::max(res.max_audit_drift, audit());
  }
  res.final_state = snapshot();
  if (config_.polish_map && config_.iterations > 0) polish(res.map_state);
  res.stats = stats_;
  return res;
}

}  // namespace lam
