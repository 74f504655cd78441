#pragma once

#include <span>
#include <vector>

#include "sclkit/core.hpp"
#include "sclkit/oracle.hpp"
#include "sclkit/pool.hpp"
#include "sclkit/scl.hpp"
#include "sclkit/weights.hpp"

namespace sclkit {

/// Prior over a finite nuisance grid; the alphabet holds the grid labels.
using NuisancePrior = FiniteDistribution;

/// Composite evidence: log integral over the nuisance grid of
/// pi(psi) * L_c(theta, psi, w), summed exactly via log-sum-exp. Models that
/// do not depend on psi simply contribute their fixed likelihood to every
/// grid point.
inline double composite_evidence_log(std::span<const FeatureModel> models, std::size_t theta,
                                     const CluesObservation& obs, std::span<const double> w,
                                     const NuisancePrior& prior_psi) {
  for (const auto& m : models)
    if (m.parametric() && *m.nuisance_grid() != prior_psi.alphabet())
      raise(errc::dimension_mismatch,
            "feature '" + m.name() + "' uses a different nuisance grid than the prior");
  std::vector<double> terms(prior_psi.size());
  for (std::size_t p = 0; p < prior_psi.size(); ++p)
    terms[p] = prior_psi.log_prob(p) + composite_log_likelihood(models, theta, obs, w, p);
  double out = logsumexp(terms);
  if (out == -kInfinity)
    raise(errc::all_zero_mass, "composite evidence vanishes on the entire nuisance grid");
  return out;
}

/// Super composite evidence: the reference-normalized evidence ratio
/// log [L-bar_c(theta_j, w_j) / L-bar_c(theta_0, w_j)], and 0 at the reference.
inline double super_composite_evidence_log(std::span<const FeatureModel> models, std::size_t theta_j,
                                           const CluesObservation& obs, const WeightMatrix& weights,
                                           const NuisancePrior& prior_psi) {
  if (models.empty()) raise(errc::dimension_mismatch, "no feature models");
  if (weights.feature_count() != models.size())
    raise(errc::weight_dimension_mismatch, "weight matrix rows do not match the clue count");
  if (weights.alternative_count() + 1 != models.front().hypothesis_count())
    raise(errc::dimension_mismatch, "weight matrix columns do not match the hypothesis count");
  if (theta_j >= models.front().hypothesis_count())
    raise(errc::index_out_of_range, "hypothesis index out of range");
  if (theta_j == HypothesisSpace::reference_index) return 0.0;
  auto column = weights.column(theta_j - 1);
  double denominator;
  try {
    denominator = composite_evidence_log(models, HypothesisSpace::reference_index, obs, column,
                                         prior_psi);
  } catch (const error& e) {
    if (e.code() == errc::all_zero_mass)
      raise(errc::reference_evidence_zero,
            "the reference hypothesis has zero composite evidence for this observation");
    throw;
  }
  try {
    return composite_evidence_log(models, theta_j, obs, column, prior_psi) - denominator;
  } catch (const error& e) {
    // A vanishing numerator against positive reference evidence is the
    // meaningful limit: the observation rules theta_j out.
    if (e.code() == errc::all_zero_mass) return -kInfinity;
    throw;
  }
}

/// Posterior from the super composite evidence,
/// p(theta|y) proportional to pi(theta) * exp(super_composite_evidence_log).
inline FiniteDistribution nuisance_posterior(const FiniteDistribution& prior_theta,
                                             std::span<const FeatureModel> models,
                                             const CluesObservation& obs,
                                             const WeightMatrix& weights,
                                             const NuisancePrior& prior_psi) {
  if (models.empty()) raise(errc::dimension_mismatch, "no feature models");
  if (prior_theta.size() != models.front().hypothesis_count())
    raise(errc::dimension_mismatch, "prior and feature models disagree on the hypothesis count");
  if (prior_theta.log_prob(HypothesisSpace::reference_index) == -kInfinity)
    raise(errc::reference_prior_zero, "the reference hypothesis must have positive prior mass");
  std::vector<double> scores(prior_theta.size(), -kInfinity);
  for (std::size_t t = 0; t < prior_theta.size(); ++t) {
    double lp = prior_theta.log_prob(t);
    if (lp == -kInfinity) continue;
    scores[t] = lp + super_composite_evidence_log(models, t, obs, weights, prior_psi);
  }
  return normalize_log(prior_theta.alphabet(), scores);
}

/// Constant-column counterpart: p(theta|y) proportional to
/// pi(theta) * L-bar_c(theta, w). With identical weight columns this conserves
/// every theta_j vs theta_0 odds ratio of nuisance_posterior.
inline FiniteDistribution composite_evidence_posterior(const FiniteDistribution& prior_theta,
                                                       std::span<const FeatureModel> models,
                                                       const CluesObservation& obs,
                                                       std::span<const double> w,
                                                       const NuisancePrior& prior_psi) {
  for (const auto& m : models)
    if (m.hypothesis_count() != prior_theta.size())
      raise(errc::dimension_mismatch, "prior and feature models disagree on the hypothesis count");
  std::vector<double> scores(prior_theta.size(), -kInfinity);
  for (std::size_t t = 0; t < prior_theta.size(); ++t) {
    double lp = prior_theta.log_prob(t);
    if (lp == -kInfinity) continue;
    double ev;
    try {
      ev = composite_evidence_log(models, t, obs, w, prior_psi);
    } catch (const error& e) {
      if (e.code() == errc::all_zero_mass) continue;
      throw;
    }
    scores[t] = lp + ev;
  }
  return normalize_log(prior_theta.alphabet(), scores);
}

/// Nuisance-averaged utility coefficients
/// u-bar_ij = sum_psi pi(psi) sum_z p(z_i|theta_j,psi) log[p(z_i|theta_j,psi)/p(z_i|theta_0,psi)].
/// Each psi slice is a KL divergence, so every coefficient is non-negative.
inline UtilityMatrix nuisance_utility_matrix(std::span<const FeatureModel> models,
                                             const NuisancePrior& prior_psi) {
  if (models.empty()) raise(errc::dimension_mismatch, "no feature models");
  std::size_t hypotheses = models.front().hypothesis_count();
  std::size_t n = models.size(), m = hypotheses - 1;
  std::vector<double> u(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureModel& model = models[i];
    if (model.conditional())
      raise(errc::unsupported_model, "nuisance utilities expect unconditional models");
    if (model.parametric() && *model.nuisance_grid() != prior_psi.alphabet())
      raise(errc::dimension_mismatch,
            "feature '" + model.name() + "' uses a different nuisance grid than the prior");
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < prior_psi.size(); ++p) {
        double pp = prior_psi.prob(p);
        if (pp == 0.0) continue;
        auto psi = model.parametric() ? std::optional<std::size_t>(p) : std::nullopt;
        double slice = kl_divergence(model.distribution(j + 1, psi),
                                     model.distribution(HypothesisSpace::reference_index, psi));
        if (slice == kInfinity) {
          acc = kInfinity;
          break;
        }
        acc += pp * slice;
      }
      u[i * m + j] = acc;
    }
  }
  return UtilityMatrix(n, m, std::move(u));
}

/// Per-hypothesis weight choice maximizing the nuisance-averaged expected
/// log ratio; linear in each column, so it reduces to the tie-split argmax.
inline WeightSelection optimize_weights_nuisance(const GenerativeOracle& oracle,
                                                 const NuisancePrior& prior_psi,
                                                 double tie_tol = 1e-9) {
  if (!oracle.has_nuisance())
    raise(errc::unsupported_model, "oracle carries no nuisance parameter");
  if (oracle.prior_psi()->alphabet() != prior_psi.alphabet())
    raise(errc::dimension_mismatch, "nuisance prior grid does not match the oracle grid");
  auto models = derive_feature_models(oracle);
  return optimal_weights(nuisance_utility_matrix(models, prior_psi), tie_tol);
}

}  // namespace sclkit
