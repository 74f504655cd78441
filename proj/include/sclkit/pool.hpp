#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sclkit/core.hpp"

namespace sclkit {

/// One observed feature value, plus the conditioning value when the feature's
/// model is conditional.
struct ObservedValue {
  std::string symbol;
  std::optional<std::string> conditioner;
};

/// Observed values for every feature, indexed like the feature-model list.
struct CluesObservation {
  std::vector<ObservedValue> values;
};

/// log p(z_i | theta [, psi] [, z_i^c]) for the model's own slot of `obs`.
inline double feature_log_likelihood(const FeatureModel& model, std::size_t theta,
                                     const CluesObservation& obs,
                                     std::optional<std::size_t> psi = std::nullopt) {
  if (model.index() >= obs.values.size())
    raise(errc::dimension_mismatch,
          "observation has no slot for feature '" + model.name() + "'");
  const ObservedValue& v = obs.values[model.index()];
  auto symbol = [&](const std::vector<std::string>& alphabet, const std::string& s) {
    for (std::size_t i = 0; i < alphabet.size(); ++i)
      if (alphabet[i] == s) return i;
    raise(errc::symbol_not_in_alphabet,
          "feature '" + model.name() + "': symbol '" + s + "' not in alphabet");
  };
  std::size_t z = symbol(model.alphabet(), v.symbol);
  std::optional<std::size_t> zc;
  if (model.conditional()) {
    if (!v.conditioner)
      raise(errc::missing_conditioner,
            "feature '" + model.name() + "' requires a conditioning value");
    zc = symbol(*model.conditioning_alphabet(), *v.conditioner);
  }
  if (model.parametric() && !psi)
    raise(errc::missing_nuisance, "feature '" + model.name() + "' requires a nuisance index");
  return model.log_prob(theta, z, model.parametric() ? psi : std::nullopt, zc);
}

/// log L_c(theta, w) = sum_i w_i * log l_i(theta). Zero-weight clues are
/// skipped outright, so an impossible observation under a muted clue cannot
/// poison the sum.
inline double composite_log_likelihood(std::span<const FeatureModel> models, std::size_t theta,
                                       const CluesObservation& obs, std::span<const double> w,
                                       std::optional<std::size_t> psi = std::nullopt) {
  if (w.size() != models.size())
    raise(errc::weight_dimension_mismatch, "weight vector length does not match the clue count");
  if (!validate_simplex(w, kInputSimplexTol))
    raise(errc::invalid_weights, "clue weights must lie on the simplex");
  double acc = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (w[i] == 0.0) continue;
    acc += w[i] * feature_log_likelihood(models[i], theta, obs, psi);
  }
  return acc;
}

/// Posterior of the generalized logarithmic opinion pool,
/// p*(theta) proportional to pi(theta) * prod_i l_i(theta)^{w_i}.
inline FiniteDistribution log_linear_pool(const FiniteDistribution& prior,
                                          std::span<const FeatureModel> models,
                                          const CluesObservation& obs, std::span<const double> w) {
  for (const auto& m : models)
    if (m.hypothesis_count() != prior.size())
      raise(errc::dimension_mismatch, "prior and feature models disagree on the hypothesis count");
  std::vector<double> scores(prior.size());
  for (std::size_t t = 0; t < prior.size(); ++t)
    scores[t] = prior.log_prob(t) + composite_log_likelihood(models, t, obs, w);
  return normalize_log(prior.alphabet(), scores);
}

/// Pool of already-formed opinions: p*(theta) proportional to
/// pi(theta) * prod_i q_i(theta)^{w_i}.
inline FiniteDistribution log_linear_pool(const FiniteDistribution& prior,
                                          std::span<const FiniteDistribution> opinions,
                                          std::span<const double> w) {
  if (w.size() != opinions.size())
    raise(errc::weight_dimension_mismatch, "weight vector length does not match the opinion count");
  if (!validate_simplex(w, kInputSimplexTol))
    raise(errc::invalid_weights, "opinion weights must lie on the simplex");
  std::vector<double> scores(prior.log_probs());
  for (std::size_t i = 0; i < opinions.size(); ++i) {
    if (opinions[i].alphabet() != prior.alphabet())
      raise(errc::alphabet_mismatch, "opinions must share the prior's alphabet");
    if (w[i] == 0.0) continue;
    for (std::size_t t = 0; t < scores.size(); ++t) scores[t] += w[i] * opinions[i].log_prob(t);
  }
  return normalize_log(prior.alphabet(), scores);
}

/// Single-agent Bayes posterior p_i(theta) proportional to pi(theta) * l_i(theta).
inline FiniteDistribution agent_posterior(const FiniteDistribution& prior, const FeatureModel& model,
                                          const CluesObservation& obs,
                                          std::optional<std::size_t> psi = std::nullopt) {
  if (model.hypothesis_count() != prior.size())
    raise(errc::dimension_mismatch, "prior and feature model disagree on the hypothesis count");
  std::vector<double> scores(prior.size());
  for (std::size_t t = 0; t < prior.size(); ++t)
    scores[t] = prior.log_prob(t) + feature_log_likelihood(model, t, obs, psi);
  return normalize_log(prior.alphabet(), scores);
}

/// sum_i w_i * D(candidate || p_i). The weights only need to be non-negative;
/// the pool minimizes this objective whatever their sum.
inline double average_kl_objective(const FiniteDistribution& candidate,
                                   std::span<const FiniteDistribution> agent_posteriors,
                                   std::span<const double> w) {
  if (w.size() != agent_posteriors.size())
    raise(errc::weight_dimension_mismatch, "weight vector length does not match the agent count");
  double acc = 0.0;
  for (std::size_t i = 0; i < agent_posteriors.size(); ++i) {
    if (std::isnan(w[i]) || w[i] < 0.0)
      raise(errc::invalid_weights, "objective weights must be non-negative");
    if (w[i] == 0.0) continue;
    acc += w[i] * kl_divergence(candidate, agent_posteriors[i]);
  }
  return acc;
}

}  // namespace sclkit
