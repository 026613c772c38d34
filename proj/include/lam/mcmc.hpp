#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "lam/field.hpp"
#include "lam/grid.hpp"
#include "lam/model.hpp"
#include "lam/planner.hpp"
#include "lam/scene.hpp"

namespace lam {

struct ChainConfig {
  std::int64_t iterations = 30000;
  std::int64_t burn_in = 2000;
  std::uint64_t seed = 0;
  std::array<int, 3> proposal_weights{6, 1, 3};  // flip : birth-death : relation
  int gmm_refit_period = 100;
  std::int64_t trace_period = 100;
  std::int64_t audit_period = 1000;
  double stop_speed = 0.2;  // cells/frame below which a frame counts as stopped
  int stop_frames = 10;     // consecutive stopped frames that make a stopping location
  double source_sigma = 1.0;  // isotropic sigma for initialized/born sources
  double epsilon = 1e-3;      // planner step regularizer
  bool polish_map = true;     // hill-climb the returned MAP state after sampling
  int polish_radius = 2;      // Chebyshev move radius per source per round
  FieldParams field;
};

/// Cached log posterior must stay within this of a full recomputation.
inline constexpr double kAuditTolerance = 1e-6;

enum class MoveType { kFlip = 0, kBirthDeath = 1, kRelation = 2 };

struct ProposalStats {
  std::array<std::int64_t, 3> proposed{};
  std::array<std::int64_t, 3> accepted{};

  double acceptance_rate(MoveType t) const {
    std::int64_t p = proposed[static_cast<size_t>(t)];
    return p == 0 ? 0.0 : static_cast<double>(accepted[static_cast<size_t>(t)]) / p;
  }
};

/// Best behavior hypothesis for one agent under its selected goals.
struct AgentReport {
  Behavior z = Behavior::kSingle;
  std::vector<int> goal_order;  // single: {j}; sequential: visit order; change: {from, to}
  int switch_frame = -1;        // change only: best in-prefix switch frame
  double score = 0.0;           // trajectory term + behavior log prior
};

struct ChainSnapshot {
  ConstraintMap cmap;
  std::vector<Source> sources;
  RelationMatrix rel{0, 0};
  std::vector<double> theta;
  std::optional<Gmm> gmm;
  std::vector<AgentReport> agents;
  double log_post = 0.0;
};

struct TraceRow {
  std::int64_t iteration = 0;
  double log_post = 0.0;
  int n_sources = 0;
  double accept_flip = 0.0;
  double accept_birth_death = 0.0;
  double accept_relation = 0.0;
};

struct McmcResult {
  ChainSnapshot map_state;
  ChainSnapshot final_state;
  ProposalStats stats;
  std::vector<TraceRow> trace;
  double max_audit_drift = 0.0;
};

/// Per-source routing tables over a fixed constraint map: combined field
/// (attraction + shared repulsion) and cost-to-go from every cell.
class GoalTables {
 public:
  GoalTables(const ConstraintMap& cmap, std::vector<Source> sources, FieldParams params,
             double epsilon);

  int count() const { return static_cast<int>(sources_.size()); }
  const Source& source(int j) const { return sources_.at(static_cast<size_t>(j)); }
  const VectorField& field(int j) const { return fields_.at(static_cast<size_t>(j)); }
  const CostToGo& togo(int j) const { return togos_.at(static_cast<size_t>(j)); }
  const ConstraintMap& map() const { return cmap_; }
  const VectorField& repulsion() const { return repulsion_; }
  double epsilon() const { return epsilon_; }
  const FieldParams& params() const { return params_; }

 private:
  std::vector<Source> sources_;
  ConstraintMap cmap_;
  FieldParams params_;
  double epsilon_;
  VectorField repulsion_;
  std::vector<VectorField> fields_;
  std::vector<CostToGo> togos_;
};

/// Inputs score_agent needs per selected goal. `cum` holds the observed
/// prefix's cumulative energies under the goal's field (size t0); `visits`
/// the observed frames within Chebyshev distance 1 of the goal center.
struct GoalView {
  const CostToGo* togo = nullptr;
  const double* cum = nullptr;  // prefix field work, one entry per observed frame
  Cell mu;
};

/// Sampling-time agent score: the agent is taken to head for the closest
/// selected goal (routing cost from its spawn cell, Euclidean fallback when
/// unreachable, lowest index on ties). The trajectory term is the energy of
/// the cheapest completion of the observed prefix: field work already spent
/// plus the optimal remainder from the last observed cell. `goals` lists the
/// selected source indices ascending, one GoalView each.
AgentReport score_agent_views(const Trajectory& traj, std::span<const GoalView> views,
                              std::span<const int> goals, int n_sources,
                              const ModelParams& params);

/// Convenience wrapper building prefix energies from GoalTables.
AgentReport score_agent(const Trajectory& traj, const GoalTables& tables,
                        std::span<const int> goals, int n_sources, const ModelParams& params);

/// Full from-scratch posterior evaluation (shared by chain audits and tests).
/// theta is derived as fit_theta(rel). Agents whose observed prefix touches a
/// non-walkable cell score -infinity.
struct PosteriorBreakdown {
  double ising = 0.0;
  double source = 0.0;
  double relation = 0.0;
  double appearance = 0.0;
  std::vector<AgentReport> agents;
  double total = 0.0;
};

PosteriorBreakdown evaluate_posterior(const Scene& scene, const ConstraintMap& cmap,
                                      const std::vector<Source>& sources,
                                      const RelationMatrix& rel, const Gmm* gmm,
                                      const ModelParams& params, const FieldParams& field_params,
                                      double epsilon);

/// Metropolis-Hastings chain over {C, S, R} with cached per-term posterior.
class Chain {
 public:
  Chain(const Scene& scene, ModelParams params, ChainConfig config);

  void step();
  std::int64_t iteration() const { return iteration_; }
  double log_post() const { return log_post_; }
  const ConstraintMap& cmap() const { return cmap_; }
  const std::vector<Source>& sources() const { return sources_; }
  const RelationMatrix& relations() const { return rel_; }
  const ProposalStats& stats() const { return stats_; }
  const std::vector<AgentReport>& agent_reports() const { return reports_; }

  /// Probability mass the flip proposal puts on label +1 at this cell.
  double flip_walkable_probability(Cell c) const;

  ChainSnapshot snapshot() const;

  /// |cached log_post - full recomputation|; throws std::logic_error above
  /// kAuditTolerance. Also re-checks structural invariants.
  double audit() const;

  /// Deterministic coordinate ascent on the snapshot: source positions move
  /// within polish_radius, sources are dropped or seeded at stopping cells,
  /// and relations re-lock greedily. A step is kept only when the joint
  /// posterior strictly improves. Leaves chain state untouched.
  void polish(ChainSnapshot& snap) const;

  /// Full loop: burn-in, MAP tracking, trace rows, periodic audits/refits.
  McmcResult run();

 private:
  struct SourceCache {
    Cell mu;
    VectorField attraction;
    VectorField field;  // attraction + repulsion
    CostToGo togo;
    std::vector<std::vector<double>> cum;  // per agent, size t0
  };

  void initialize();
  std::vector<int> stop_candidate_cells() const;
  std::unique_ptr<SourceCache> build_cache(const Source& s) const;
  AgentReport score_cached(int agent, const RelationMatrix& rel, int n_sources,
                           std::span<const SourceCache* const> caches,
                           std::span<const CostToGo* const> togo_override) const;
  std::vector<const SourceCache*> cache_ptrs() const;
  void recompose_log_post();
  bool accept_move(double log_q_ratio, double candidate_lp);
  void propose_flip();
  void propose_birth_death();
  void propose_relation();
  void refit_appearance();
  Cell sample_walkable_cell(bool& ok);

  const Scene* scene_;
  ModelParams params_;
  ChainConfig config_;
  std::mt19937_64 rng_;

  ConstraintMap cmap_;
  std::vector<Source> sources_;
  RelationMatrix rel_{0, 0};
  std::vector<double> theta_;
  std::optional<Gmm> gmm_;
  std::vector<double> cell_log_density_;  // appearance log density per cell

  std::vector<std::unique_ptr<SourceCache>> caches_;
  VectorField repulsion_;
  bool repulsion_active_ = false;

  std::vector<int> coverage_;   // observed visits per cell
  std::vector<double> q_plus_;  // flip proposal mass on +1 per cell

  std::vector<AgentReport> reports_;
  std::int64_t ising_bonds_ = 0;  // exact bond sum; ising term = beta * bonds
  double ising_lp_ = 0.0;
  double source_lp_ = 0.0;
  double relation_lp_ = 0.0;
  double appearance_ll_ = 0.0;
  double agents_score_ = 0.0;
  double log_post_ = 0.0;

  ProposalStats stats_;
  std::int64_t iteration_ = 0;
};

}  // namespace lam
