#include "lam/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lam/kernels.hpp"

namespace lam {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kVarFloor = 1e-6;

double log_diag_normal(const std::array<double, 3>& mean, const std::array<double, 3>& var,
                       const std::array<float, 3>& x) {
  double acc = 0.0;
  for (int d = 0; d < 3; ++d) {
    double diff = static_cast<double>(x[d]) - mean[d];
    acc += -0.5 * (std::log(2.0 * M_PI * var[d]) + diff * diff / var[d]);
  }
  return acc;
}

}  // namespace

RelationMatrix::RelationMatrix(int n_agents, int n_sources)
    : n_agents_(n_agents), n_sources_(n_sources) {
  if (n_agents < 0 || n_sources < 0) throw std::invalid_argument("negative relation dimensions");
  r_.assign(static_cast<size_t>(n_agents) * static_cast<size_t>(n_sources), 0);
}

size_t RelationMatrix::check(int agent, int source) const {
  if (agent < 0 || agent >= n_agents_ || source < 0 || source >= n_sources_)
    throw std::out_of_range("relation index out of range");
  return static_cast<size_t>(agent) * static_cast<size_t>(n_sources_) + static_cast<size_t>(source);
}

int RelationMatrix::goal_count(int agent) const {
  int n = 0;
  for (int j = 0; j < n_sources_; ++j) n += at(agent, j) ? 1 : 0;
  return n;
}

std::vector<int> RelationMatrix::goals_of(int agent) const {
  std::vector<int> out;
  for (int j = 0; j < n_sources_; ++j)
    if (at(agent, j)) out.push_back(j);
  return out;
}

std::vector<int> RelationMatrix::counts_per_source() const {
  std::vector<int> b(static_cast<size_t>(n_sources_), 0);
  for (int i = 0; i < n_agents_; ++i)
    for (int j = 0; j < n_sources_; ++j)
      if (at(i, j)) ++b[static_cast<size_t>(j)];
  return b;
}

void RelationMatrix::insert_source_column() {
  std::vector<uint8_t> next(static_cast<size_t>(n_agents_) * static_cast<size_t>(n_sources_ + 1), 0);
  for (int i = 0; i < n_agents_; ++i)
    for (int j = 0; j < n_sources_; ++j)
      next[static_cast<size_t>(i) * (n_sources_ + 1) + j] = r_[static_cast<size_t>(i) * n_sources_ + j];
  r_ = std::move(next);
  ++n_sources_;
}

void RelationMatrix::erase_source_column(int source) {
  if (source < 0 || source >= n_sources_) throw std::out_of_range("relation column out of range");
  std::vector<uint8_t> next(static_cast<size_t>(n_agents_) * static_cast<size_t>(n_sources_ - 1), 0);
  for (int i = 0; i < n_agents_; ++i) {
    int k = 0;
    for (int j = 0; j < n_sources_; ++j) {
      if (j == source) continue;
      next[static_cast<size_t>(i) * (n_sources_ - 1) + k++] = r_[static_cast<size_t>(i) * n_sources_ + j];
    }
  }
  r_ = std::move(next);
  --n_sources_;
}

std::vector<double> fit_theta(const RelationMatrix& rel) {
  std::vector<int> b = rel.counts_per_source();
  std::vector<double> theta(b.size());
  double total = 0.0;
  for (int c : b) total += c + 1.0;
  for (size_t j = 0; j < b.size(); ++j) theta[j] = (b[j] + 1.0) / total;
  return theta;
}

std::vector<double> uniform_theta(int n_sources) {
  if (n_sources <= 0) return {};
  return std::vector<double>(static_cast<size_t>(n_sources), 1.0 / n_sources);
}

Gmm fit_gmm(const ConstraintMap& cmap, const FeatureChannel& features, int max_iters) {
  const Lattice& lat = cmap.lattice();
  if (features.color.size() != static_cast<size_t>(lat.size()))
    throw ModelError("feature channel does not match lattice");

  std::vector<int> cells;
  for (int i = 0; i < lat.size(); ++i)
    if (cmap.walkable(lat.cell(i))) cells.push_back(i);
  if (cells.empty()) throw ModelError("no walkable cells to fit appearance model");

  auto luminance = [&](int i) {
    const auto& c = features.color[static_cast<size_t>(i)];
    return static_cast<double>(c[0]) + c[1] + c[2];
  };

  // Luminance extremes seed the two components; global variance seeds spread.
  int lo = cells[0], hi = cells[0];
  for (int i : cells) {
    if (luminance(i) < luminance(lo)) lo = i;
    if (luminance(i) > luminance(hi)) hi = i;
  }
  std::array<double, 3> gvar{};
  {
    std::array<double, 3> mean{};
    for (int i : cells)
      for (int d = 0; d < 3; ++d) mean[d] += features.color[static_cast<size_t>(i)][d];
    for (int d = 0; d < 3; ++d) mean[d] /= static_cast<double>(cells.size());
    for (int i : cells)
      for (int d = 0; d < 3; ++d) {
        double diff = features.color[static_cast<size_t>(i)][d] - mean[d];
        gvar[d] += diff * diff;
      }
    for (int d = 0; d < 3; ++d)
      gvar[d] = std::max(gvar[d] / static_cast<double>(cells.size()), kVarFloor);
  }

  Gmm gmm;
  for (int k = 0; k < 2; ++k) {
    int seed_cell = k == 0 ? lo : hi;
    for (int d = 0; d < 3; ++d) {
      gmm.comps[k].mean[d] = features.color[static_cast<size_t>(seed_cell)][d];
      gmm.comps[k].var[d] = gvar[d];
    }
    gmm.comps[k].weight = 0.5;
  }

  std::vector<double> resp(cells.size());
  double prev_ll = kNegInf;
  for (int iter = 0; iter < max_iters; ++iter) {
    double ll = 0.0;
    std::array<double, 2> wsum{};
    std::array<std::array<double, 3>, 2> msum{};
    std::array<std::array<double, 3>, 2> vsum{};
    for (size_t n = 0; n < cells.size(); ++n) {
      const auto& x = features.color[static_cast<size_t>(cells[n])];
      double l0 = std::log(gmm.comps[0].weight) + log_diag_normal(gmm.comps[0].mean, gmm.comps[0].var, x);
      double l1 = std::log(gmm.comps[1].weight) + log_diag_normal(gmm.comps[1].mean, gmm.comps[1].var, x);
      double m = std::max(l0, l1);
      double z = std::exp(l0 - m) + std::exp(l1 - m);
      ll += m + std::log(z);
      double r0 = std::exp(l0 - m) / z;
      resp[n] = r0;
      wsum[0] += r0;
      wsum[1] += 1.0 - r0;
      for (int d = 0; d < 3; ++d) {
        msum[0][d] += r0 * x[d];
        msum[1][d] += (1.0 - r0) * x[d];
      }
    }
    for (int k = 0; k < 2; ++k) {
      if (wsum[k] <= 0.0) continue;  // starved component keeps its parameters
      gmm.comps[k].weight = wsum[k] / static_cast<double>(cells.size());
      for (int d = 0; d < 3; ++d) gmm.comps[k].mean[d] = msum[k][d] / wsum[k];
    }
    for (size_t n = 0; n < cells.size(); ++n) {
      const auto& x = features.color[static_cast<size_t>(cells[n])];
      for (int d = 0; d < 3; ++d) {
        double d0 = x[d] - gmm.comps[0].mean[d];
        double d1 = x[d] - gmm.comps[1].mean[d];
        vsum[0][d] += resp[n] * d0 * d0;
        vsum[1][d] += (1.0 - resp[n]) * d1 * d1;
      }
    }
    for (int k = 0; k < 2; ++k) {
      if (wsum[k] <= 0.0) continue;
      for (int d = 0; d < 3; ++d)
        gmm.comps[k].var[d] = std::max(vsum[k][d] / wsum[k], kVarFloor);
    }
    if (!std::isfinite(ll)) throw ModelError("appearance model fit diverged");
    if (iter > 0 && std::abs(ll - prev_ll) < 1e-8) break;
    prev_ll = ll;
  }
  for (const auto& c : gmm.comps)
    for (int d = 0; d < 3; ++d)
      if (!std::isfinite(c.mean[d]) || !(c.var[d] >= kVarFloor))
        throw ModelError("degenerate appearance component");
  return gmm;
}

double gmm_log_density(const Gmm& gmm, const std::array<float, 3>& phi) {
  double l0 = std::log(gmm.comps[0].weight) + log_diag_normal(gmm.comps[0].mean, gmm.comps[0].var, phi);
  double l1 = std::log(gmm.comps[1].weight) + log_diag_normal(gmm.comps[1].mean, gmm.comps[1].var, phi);
  double m = std::max(l0, l1);
  if (m == kNegInf) return kNegInf;
  return m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
}

double ising_log_prior(const ConstraintMap& cmap, double beta) {
  const Lattice& lat = cmap.lattice();
  int64_t bonds = kernels::ising_bond_sum(cmap.labels().data(), lat.width(), lat.height());
  return beta * static_cast<double>(bonds);
}

double ising_flip_delta(const ConstraintMap& cmap, Cell cell, double beta) {
  const Lattice& lat = cmap.lattice();
  int c = cmap.at(cell);
  int nsum = 0;
  const Cell deltas[4] = {{cell.x - 1, cell.y}, {cell.x + 1, cell.y},
                          {cell.x, cell.y - 1}, {cell.x, cell.y + 1}};
  for (const Cell& n : deltas)
    if (lat.contains(n)) nsum += cmap.at(n);
  return beta * (-2.0 * c * nsum);
}

double source_log_prior(const std::vector<Source>& sources, const ConstraintMap& cmap,
                        double eta, double rho) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0,1)");
  double n = static_cast<double>(sources.size());
  double lp = n * std::log(eta) - eta - std::lgamma(n + 1.0);
  for (const Source& s : sources)
    lp += cmap.at(s.mu) > 0 ? std::log(rho) : std::log(1.0 - rho);
  return lp;
}

double relation_log_prior(const RelationMatrix& rel, std::span<const double> theta) {
  if (theta.size() != static_cast<size_t>(rel.n_sources()))
    throw std::invalid_argument("theta size does not match source count");
  std::vector<int> b = rel.counts_per_source();
  double lp = 0.0;
  for (size_t j = 0; j < b.size(); ++j) {
    if (b[j] == 0) continue;
    if (theta[j] <= 0.0) return kNegInf;
    lp += b[j] * std::log(theta[j]);
  }
  return lp;
}

double behavior_log_prior(Behavior z, int n_goals, double kappa, double gamma, int n_sources) {
  switch (z) {
    case Behavior::kSingle:
      return std::log(1.0 - kappa);
    case Behavior::kSequential: {
      if (n_goals < 1) throw std::domain_error("sequential behavior needs at least one goal");
      return (n_goals - 1) * std::log(kappa) + std::log(1.0 - kappa);
    }
    case Behavior::kChange: {
      if (n_sources < 2) throw std::domain_error("change of intent needs at least two sources");
      return std::log(gamma / (n_sources - 1));
    }
  }
  throw std::domain_error("unknown behavior label");
}

double appearance_log_likelihood(const ConstraintMap& cmap, const FeatureChannel* features,
                                 const Gmm* gmm) {
  if (features == nullptr) return 0.0;
  if (gmm == nullptr) throw ModelError("appearance model required when features present");
  const Lattice& lat = cmap.lattice();
  if (features->color.size() != static_cast<size_t>(lat.size()))
    throw ModelError("feature channel does not match lattice");
  double ll = 0.0;
  for (int i = 0; i < lat.size(); ++i)
    if (cmap.walkable(lat.cell(i))) ll += gmm_log_density(*gmm, features->color[static_cast<size_t>(i)]);
  return ll;
}

double joint_log_posterior(const ConstraintMap& cmap, const std::vector<Source>& sources,
                           const RelationMatrix& rel, std::span<const double> theta,
                           std::span<const double> agent_scores, const FeatureChannel* features,
                           const Gmm* gmm, const ModelParams& params) {
  double lp = ising_log_prior(cmap, params.beta);
  lp += source_log_prior(sources, cmap, params.eta, params.rho);
  lp += relation_log_prior(rel, theta);
  lp += appearance_log_likelihood(cmap, features, gmm);
  for (double s : agent_scores) lp += s;
  return lp;
}

}  // namespace lam
