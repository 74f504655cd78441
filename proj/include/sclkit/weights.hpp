#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "sclkit/core.hpp"
#include "sclkit/oracle.hpp"
#include "sclkit/scl.hpp"

namespace sclkit {

/// n x m matrix of KL utilities u_ij = D(p(z_i|theta_j) || p(z_i|theta_0)),
/// in nats; +inf marks a clue whose supports split the two hypotheses.
class UtilityMatrix {
 public:
  UtilityMatrix(std::size_t feature_count, std::size_t alternative_count,
                std::vector<double> entries)
      : rows_(feature_count), cols_(alternative_count), entries_(std::move(entries)) {
    if (rows_ == 0 || cols_ == 0)
      raise(errc::dimension_mismatch, "utility matrix must have at least one row and one column");
    if (entries_.size() != rows_ * cols_)
      raise(errc::dimension_mismatch, "entry count does not match the matrix shape");
    for (double x : entries_)
      if (std::isnan(x) || x < 0.0)
        raise(errc::invalid_distribution, "utilities must be non-negative");
  }

  std::size_t feature_count() const { return rows_; }
  std::size_t alternative_count() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_.at(i * cols_ + j); }
  const std::vector<double>& entries() const { return entries_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> entries_;
};

/// Exact per-clue, per-hypothesis KL utilities from unconditional,
/// nuisance-free sampling tables.
inline UtilityMatrix utility_matrix(std::span<const FeatureModel> models,
                                    const HypothesisSpace& space) {
  if (models.empty()) raise(errc::dimension_mismatch, "no feature models");
  for (const auto& m : models) {
    if (m.hypothesis_count() != space.size())
      raise(errc::dimension_mismatch, "feature models do not cover the hypothesis space");
    if (m.conditional() || m.parametric())
      raise(errc::unsupported_model,
            "utility_matrix expects unconditional, nuisance-free models");
  }
  std::size_t n = models.size(), m = space.alternative_count();
  std::vector<double> u(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      u[i * m + j] = kl_divergence(models[i].distribution(j + 1),
                                   models[i].distribution(HypothesisSpace::reference_index));
  return UtilityMatrix(n, m, std::move(u));
}

/// Expected log-SCL under the joint p(y, theta):
/// sum_j pi(theta_j) sum_i w_ij u_ij. The reference hypothesis contributes
/// nothing since its ratio is identically 1.
inline double expected_utility(const UtilityMatrix& u, const WeightMatrix& w,
                               const FiniteDistribution& prior) {
  if (u.feature_count() != w.feature_count() || u.alternative_count() != w.alternative_count())
    raise(errc::dimension_mismatch, "utility and weight matrices disagree in shape");
  if (prior.size() != u.alternative_count() + 1)
    raise(errc::dimension_mismatch, "prior does not cover the hypothesis space");
  double acc = 0.0;
  for (std::size_t j = 0; j < u.alternative_count(); ++j) {
    double pj = prior.prob(j + 1);
    if (pj == 0.0) continue;
    for (std::size_t i = 0; i < u.feature_count(); ++i) {
      if (w(i, j) == 0.0) continue;
      double term = u(i, j);
      if (term == kInfinity) return kInfinity;
      acc += pj * w(i, j) * term;
    }
  }
  return acc;
}

/// Sample-average log-SCL over labeled examples; converges to
/// expected_utility when the examples come from the modeled joint.
inline double empirical_utility(std::span<const OracleSample> samples,
                                std::span<const FeatureModel> models, const WeightMatrix& w) {
  if (samples.empty()) raise(errc::empty_sample, "no labeled examples");
  double acc = 0.0;
  for (const auto& s : samples) acc += scl_log(models, s.theta, s.obs, w);
  return acc / static_cast<double>(samples.size());
}

/// Result of the sparsity-enforcing weight rule: per column, the KL-maximal
/// clue set S_j with equal weights over it. A hypothesis whose utilities are
/// all zero is invisible through every clue; its column falls back to uniform
/// weights and the flag is set so callers can warn.
struct WeightSelection {
  WeightMatrix matrix;
  std::vector<std::vector<std::size_t>> tie_sets;
  std::vector<bool> invisible;
};

namespace detail {

inline WeightSelection optimal_weights_impl(const UtilityMatrix& u,
                                            const std::vector<std::vector<bool>>* allowed,
                                            double tie_tol) {
  std::size_t n = u.feature_count(), m = u.alternative_count();
  std::vector<double> e(n * m, 0.0);
  std::vector<std::vector<std::size_t>> ties(m);
  std::vector<bool> invisible(m, false);
  for (std::size_t j = 0; j < m; ++j) {
    auto usable = [&](std::size_t i) { return allowed == nullptr || (*allowed)[j][i]; };
    double best = -1.0;
    bool any = false, has_inf = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!usable(i)) continue;
      any = true;
      if (u(i, j) == kInfinity) has_inf = true;
      best = std::max(best, u(i, j));
    }
    if (!any)
      raise(errc::invalid_weights, "column " + std::to_string(j) + " masks out every clue");
    for (std::size_t i = 0; i < n; ++i) {
      if (!usable(i)) continue;
      bool winner = has_inf ? u(i, j) == kInfinity : u(i, j) >= best - tie_tol;
      if (winner) ties[j].push_back(i);
    }
    invisible[j] = !has_inf && best == 0.0;
    double share = 1.0 / static_cast<double>(ties[j].size());
    for (std::size_t i : ties[j]) e[i * m + j] = share;
  }
  return WeightSelection{WeightMatrix(n, m, std::move(e)), std::move(ties), std::move(invisible)};
}

}  // namespace detail

inline WeightSelection optimal_weights(const UtilityMatrix& u, double tie_tol = 1e-9) {
  return detail::optimal_weights_impl(u, nullptr, tie_tol);
}

/// Constrained variant: `allowed[j][i]` masks which clues may carry weight for
/// hypothesis j+1 (forced zeros applied before the argmax).
inline WeightSelection optimal_weights(const UtilityMatrix& u,
                                       const std::vector<std::vector<bool>>& allowed,
                                       double tie_tol = 1e-9) {
  if (allowed.size() != u.alternative_count())
    raise(errc::dimension_mismatch, "mask must provide one row set per hypothesis column");
  for (const auto& col : allowed)
    if (col.size() != u.feature_count())
      raise(errc::dimension_mismatch, "mask column length does not match the clue count");
  return detail::optimal_weights_impl(u, &allowed, tie_tol);
}

/// Exact coefficients c_i = E_{p(y|theta_star)}[log p(z_i|theta)/p(z_i|theta_0)],
/// the linear objective the per-column weight choice maximizes.
inline std::vector<double> clue_log_ratio_coefficients(const GenerativeOracle& oracle,
                                                       std::size_t theta, std::size_t theta_star) {
  if (oracle.has_nuisance())
    raise(errc::unsupported_model, "expected log-ratios are defined for nuisance-free oracles");
  std::vector<double> out(oracle.feature_count());
  for (std::size_t i = 0; i < oracle.feature_count(); ++i) {
    auto ps = induced_distribution(oracle, i, theta_star);
    auto pt = induced_distribution(oracle, i, theta).log_probs();
    auto p0 = induced_distribution(oracle, i, HypothesisSpace::reference_index).log_probs();
    double finite = 0.0;
    bool pos_inf = false, neg_inf = false;
    for (std::size_t z = 0; z < ps.size(); ++z) {
      double p = ps.prob(z);
      if (p == 0.0) continue;
      if (pt[z] == -kInfinity && p0[z] == -kInfinity)
        raise(errc::indeterminate_ratio, "clue has a 0/0 likelihood ratio on its support");
      if (p0[z] == -kInfinity)
        pos_inf = true;
      else if (pt[z] == -kInfinity)
        neg_inf = true;
      else
        finite += p * (pt[z] - p0[z]);
    }
    if (pos_inf && neg_inf)
      raise(errc::indeterminate_ratio, "clue has conflicting infinite expected log-ratios");
    out[i] = pos_inf ? kInfinity : neg_inf ? -kInfinity : finite;
  }
  return out;
}

/// Upper envelope M(theta) of expected log composite-likelihood ratios over
/// the weight simplex; linear in the weights, so it is attained at a vertex.
inline double consistency_envelope(const GenerativeOracle& oracle, std::size_t theta,
                                   std::size_t theta_star) {
  auto c = clue_log_ratio_coefficients(oracle, theta, theta_star);
  return *std::max_element(c.begin(), c.end());
}

/// Exact E_{p(y|theta_star)}[log SCL(theta, W)]; zero at the reference.
inline double expected_log_scl(const GenerativeOracle& oracle, std::size_t theta,
                               std::size_t theta_star, const WeightMatrix& w) {
  if (theta == HypothesisSpace::reference_index) return 0.0;
  if (w.feature_count() != oracle.feature_count() ||
      w.alternative_count() + 1 != oracle.space().size())
    raise(errc::dimension_mismatch, "weight matrix does not match the oracle");
  auto c = clue_log_ratio_coefficients(oracle, theta, theta_star);
  double finite = 0.0;
  bool pos_inf = false, neg_inf = false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double wi = w(i, theta - 1);
    if (wi == 0.0) continue;
    if (c[i] == kInfinity)
      pos_inf = true;
    else if (c[i] == -kInfinity)
      neg_inf = true;
    else
      finite += wi * c[i];
  }
  if (pos_inf && neg_inf)
    raise(errc::indeterminate_ratio, "conflicting infinite expected log-ratios");
  return pos_inf ? kInfinity : neg_inf ? -kInfinity : finite;
}

}  // namespace sclkit
