#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "sclkit/core.hpp"
#include "sclkit/oracle.hpp"
#include "sclkit/pool.hpp"

namespace sclkit {

/// Log super composite likelihood at hypothesis j: the composite
/// log-likelihood ratio sum_i w_ij (log l_i(theta_j) - log l_i(theta_0)),
/// and 0 at the reference itself.
///
/// A zero reference likelihood against a positive alternative yields +inf (a
/// meaningful limit); a 0/0 ratio under positive weight is a broken model and
/// raises IndeterminateRatio.
inline double scl_log(std::span<const FeatureModel> models, std::size_t theta_j,
                      const CluesObservation& obs, const WeightMatrix& weights) {
  if (weights.feature_count() != models.size())
    raise(errc::weight_dimension_mismatch, "weight matrix rows do not match the clue count");
  if (models.empty()) raise(errc::dimension_mismatch, "no feature models");
  std::size_t hypotheses = models.front().hypothesis_count();
  if (weights.alternative_count() + 1 != hypotheses)
    raise(errc::dimension_mismatch, "weight matrix columns do not match the hypothesis count");
  if (theta_j >= hypotheses) raise(errc::index_out_of_range, "hypothesis index out of range");
  if (theta_j == HypothesisSpace::reference_index) return 0.0;

  double finite = 0.0;
  bool pos_inf = false, neg_inf = false;
  for (std::size_t i = 0; i < models.size(); ++i) {
    double w = weights(i, theta_j - 1);
    if (w == 0.0) continue;
    double la = feature_log_likelihood(models[i], theta_j, obs);
    double lb = feature_log_likelihood(models[i], HypothesisSpace::reference_index, obs);
    if (lb == -kInfinity && la == -kInfinity)
      raise(errc::indeterminate_ratio,
            "clue '" + models[i].name() + "': observation impossible under both '" +
                std::to_string(theta_j) + "' and the reference");
    if (lb == -kInfinity)
      pos_inf = true;
    else if (la == -kInfinity)
      neg_inf = true;
    else
      finite += w * (la - lb);
  }
  if (pos_inf && neg_inf)
    raise(errc::indeterminate_ratio, "clues give conflicting infinite likelihood ratios");
  if (pos_inf) return kInfinity;
  if (neg_inf) return -kInfinity;
  return finite;
}

/// SCL posterior p(theta|y) proportional to (pi(theta)/pi(theta_0)) *
/// exp(scl_log(theta)). An infinite log-ratio collapses the posterior to a
/// point mass spread over the dominating hypothesis set.
inline FiniteDistribution scl_posterior(const FiniteDistribution& prior,
                                        std::span<const FeatureModel> models,
                                        const CluesObservation& obs, const WeightMatrix& weights) {
  if (models.empty()) raise(errc::dimension_mismatch, "no feature models");
  if (prior.size() != models.front().hypothesis_count())
    raise(errc::dimension_mismatch, "prior and feature models disagree on the hypothesis count");
  double ref = prior.log_prob(HypothesisSpace::reference_index);
  if (ref == -kInfinity)
    raise(errc::reference_prior_zero, "the reference hypothesis must have positive prior mass");

  std::vector<double> scores(prior.size(), -kInfinity);
  bool any_pos_inf = false;
  for (std::size_t t = 0; t < prior.size(); ++t) {
    double lp = prior.log_prob(t);
    if (lp == -kInfinity) continue;  // zero prior mass stays zero
    double r = scl_log(models, t, obs, weights);
    if (r == kInfinity) {
      scores[t] = kInfinity;
      any_pos_inf = true;
    } else {
      scores[t] = lp - ref + r;
    }
  }
  if (any_pos_inf) {
    std::size_t dominating = 0;
    for (double s : scores)
      if (s == kInfinity) ++dominating;
    std::vector<double> lp(scores.size(), -kInfinity);
    for (std::size_t t = 0; t < scores.size(); ++t)
      if (scores[t] == kInfinity) lp[t] = -std::log(static_cast<double>(dominating));
    return FiniteDistribution(prior.alphabet(), std::move(lp));
  }
  return normalize_log(prior.alphabet(), scores);
}

/// One-hot weight matrix assigning hypothesis j the single clue iota(j); the
/// SCL then degenerates to a per-hypothesis likelihood ratio.
inline WeightMatrix pdf_projection_matrix(std::span<const std::size_t> iota,
                                          std::size_t feature_count) {
  if (iota.empty()) raise(errc::invalid_weights, "clue assignment is empty");
  std::vector<double> e(feature_count * iota.size(), 0.0);
  for (std::size_t j = 0; j < iota.size(); ++j) {
    if (iota[j] >= feature_count)
      raise(errc::index_out_of_range,
            "clue assignment " + std::to_string(iota[j]) + " is out of range");
    e[iota[j] * iota.size() + j] = 1.0;
  }
  return WeightMatrix(feature_count, iota.size(), std::move(e));
}

/// Posterior computed through the literal population-code message product:
/// each binary truncation variable t_j forwards p(y|theta_j) or p(y|theta_0)
/// to theta, and the per-hypothesis product is renormalized. Must agree with
/// the direct Bayes posterior.
inline FiniteDistribution population_code_posterior(const GenerativeOracle& oracle, std::size_t y,
                                                    const FiniteDistribution& prior) {
  const HypothesisSpace& space = oracle.space();
  if (prior.size() != space.size())
    raise(errc::dimension_mismatch, "prior does not cover the hypothesis space");
  if (y >= oracle.y_alphabet().size()) raise(errc::index_out_of_range, "data index out of range");
  std::vector<double> ly(space.size());
  for (std::size_t t = 0; t < space.size(); ++t) ly[t] = oracle.marginal_y_log(t)[y];
  double ref = ly[HypothesisSpace::reference_index];
  if (ref == -kInfinity)
    raise(errc::reference_likelihood_zero,
          "the reference hypothesis assigns zero probability to the observed data");
  std::vector<double> scores(space.size());
  for (std::size_t t = 0; t < space.size(); ++t) {
    double acc = prior.log_prob(t);
    for (std::size_t j = 1; j < space.size(); ++j) acc += (t == j) ? ly[j] : ref;
    scores[t] = acc;
  }
  return normalize_log(space.labels(), scores);
}

inline FiniteDistribution population_code_posterior(const GenerativeOracle& oracle,
                                                    std::string_view y_symbol,
                                                    const FiniteDistribution& prior) {
  auto y = oracle.y_index(y_symbol);
  if (!y) raise(errc::symbol_not_in_alphabet, "unknown data symbol '" + std::string(y_symbol) + "'");
  return population_code_posterior(oracle, *y, prior);
}

}  // namespace sclkit
