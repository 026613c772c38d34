#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "lam/grid.hpp"
#include "lam/scene.hpp"

namespace lam {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelParams {
  double beta = 0.05;    // Ising coupling
  double eta = 3.0;      // Poisson rate on source count
  double rho = 0.95;     // walkable-placement Bernoulli
  double kappa = 0.3;    // sequential continuation
  double gamma = 0.1;    // change-of-intent mass
  double lambda = 0.5;   // energy-to-likelihood scale
  int max_goals = 3;
};

/// Binary agent x source goal matrix. Every accessor is bounds-checked; the
/// column set tracks the live source list (birth appends, death erases).
class RelationMatrix {
 public:
  RelationMatrix(int n_agents, int n_sources);

  int n_agents() const { return n_agents_; }
  int n_sources() const { return n_sources_; }
  bool at(int agent, int source) const { return r_[check(agent, source)] != 0; }
  void set(int agent, int source, bool v) { r_[check(agent, source)] = v ? 1 : 0; }

  int goal_count(int agent) const;
  std::vector<int> goals_of(int agent) const;      // ascending source index
  std::vector<int> counts_per_source() const;      // b_j = number of selecting agents

  void insert_source_column();                     // new last column, all zero
  void erase_source_column(int source);            // later columns shift down

  bool operator==(const RelationMatrix& o) const {
    return n_agents_ == o.n_agents_ && n_sources_ == o.n_sources_ && r_ == o.r_;
  }

 private:
  size_t check(int agent, int source) const;
  int n_agents_;
  int n_sources_;
  std::vector<uint8_t> r_;
};

/// Empirical selection weights for reporting: theta_j proportional to
/// b_j + 1 (add-one smoothing). Posterior scoring uses uniform_theta.
std::vector<double> fit_theta(const RelationMatrix& rel);

/// Maximum-entropy simplex 1/n used as the multinomial parameter while R is
/// latent; keeps the prior neutral across assignments of a fixed size.
std::vector<double> uniform_theta(int n_sources);

// Two-component diagonal Gaussian mixture over 3-channel cell appearance.
struct GmmComponent {
  double weight = 0.5;
  std::array<double, 3> mean{};
  std::array<double, 3> var{1.0, 1.0, 1.0};
};

struct Gmm {
  std::array<GmmComponent, 2> comps;
};

/// Expectation-maximization over the colors of currently walkable cells.
/// Deterministic (luminance-extreme initialization, no RNG). Variances are
/// floored at 1e-6; a non-finite fit raises ModelError.
Gmm fit_gmm(const ConstraintMap& cmap, const FeatureChannel& features, int max_iters = 50);

double gmm_log_density(const Gmm& gmm, const std::array<float, 3>& phi);

// Log prior and likelihood terms, each up to a state-independent constant.

double ising_log_prior(const ConstraintMap& cmap, double beta);

/// Change in ising_log_prior if `cell` were flipped.
double ising_flip_delta(const ConstraintMap& cmap, Cell cell, double beta);

double source_log_prior(const std::vector<Source>& sources, const ConstraintMap& cmap,
                        double eta, double rho);

double relation_log_prior(const RelationMatrix& rel, std::span<const double> theta);

/// Unnormalized behavior mass: single -> log(1-kappa); sequential(n) ->
/// (n-1) log kappa + log(1-kappa); change -> log(gamma/(N-1)), requiring
/// N >= 2.
double behavior_log_prior(Behavior z, int n_goals, double kappa, double gamma, int n_sources);

/// 0 when `features` is null (term drops from the posterior).
double appearance_log_likelihood(const ConstraintMap& cmap, const FeatureChannel* features,
                                 const Gmm* gmm);

/// Sum of all prior terms plus caller-supplied per-agent scores (trajectory
/// likelihood + behavior prior). Finite or -infinity, never NaN.
double joint_log_posterior(const ConstraintMap& cmap, const std::vector<Source>& sources,
                           const RelationMatrix& rel, std::span<const double> theta,
                           std::span<const double> agent_scores, const FeatureChannel* features,
                           const Gmm* gmm, const ModelParams& params);

}  // namespace lam
