#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sclkit/problem_spec.hpp"
#include "sclkit/sclkit.hpp"

namespace sclkit {

namespace report {

/// 12 significant digits, the report-wide number format.
inline std::string fmt12(double v) {
  if (v == kInfinity) return "+inf";
  if (v == -kInfinity) return "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline double round12(double v) {
  if (!std::isfinite(v)) return v;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

inline nlohmann::ordered_json num_or_inf(double v) {
  if (v == kInfinity) return "+inf";
  if (v == -kInfinity) return "-inf";
  return round12(v);
}

}  // namespace report

/// Posterior report for one observation: the SCL posterior plus, when the
/// problem carries a generative oracle, the exact Bayes posterior given the
/// same clue values and the KL gap to it.
inline std::string cmd_infer(const ProblemSpec& spec, const CluesObservation& obs, bool as_json) {
  WeightMatrix w = spec.resolve_weights();
  FiniteDistribution posterior =
      spec.psi_prior ? nuisance_posterior(spec.prior, spec.models, obs, w, *spec.psi_prior)
                     : scl_posterior(spec.prior, spec.models, obs, w);
  std::vector<double> log_ratio(spec.space.size());
  for (std::size_t t = 0; t < spec.space.size(); ++t)
    log_ratio[t] = spec.psi_prior
                       ? super_composite_evidence_log(spec.models, t, obs, w, *spec.psi_prior)
                       : scl_log(spec.models, t, obs, w);

  std::optional<FiniteDistribution> truth;
  std::optional<double> kl_gap;
  if (spec.oracle) {
    truth = joint_feature_posterior(*spec.oracle, obs);
    kl_gap = kl_divergence(*truth, posterior);
  }

  if (as_json) {
    nlohmann::ordered_json doc;
    doc["method"] = "scl";
    nlohmann::ordered_json post, ratios;
    for (std::size_t t = 0; t < spec.space.size(); ++t) {
      post[spec.space.label(t)] = report::round12(posterior.prob(t));
      ratios[spec.space.label(t)] = report::num_or_inf(log_ratio[t]);
    }
    doc["posterior"] = post;
    doc["log_scl"] = ratios;
    if (truth) {
      nlohmann::ordered_json tp;
      for (std::size_t t = 0; t < spec.space.size(); ++t)
        tp[spec.space.label(t)] = report::round12(truth->prob(t));
      doc["true_posterior"] = tp;
      doc["kl_to_truth"] = report::num_or_inf(*kl_gap);
    }
    return doc.dump(2) + "\n";
  }

  std::ostringstream out;
  out << "hypothesis\tposterior\tlog_scl";
  if (truth) out << "\ttrue_posterior";
  out << "\n";
  for (std::size_t t = 0; t < spec.space.size(); ++t) {
    out << spec.space.label(t) << "\t" << report::fmt12(posterior.prob(t)) << "\t"
        << report::fmt12(log_ratio[t]);
    if (truth) out << "\t" << report::fmt12(truth->prob(t));
    out << "\n";
  }
  if (kl_gap) out << "# kl_to_truth\t" << report::fmt12(*kl_gap) << "\n";
  return out.str();
}

/// Weight report: the exact utility matrix (+inf sentinels preserved), the
/// chosen weights, per-hypothesis tie sets, and invisibility warnings.
inline std::string cmd_optimize(const ProblemSpec& spec) {
  for (const auto& m : spec.models)
    if (m.conditional())
      throw spec_error("spec error: 'optimize' needs unconditional features; '" + m.name() +
                       "' is conditional");
  UtilityMatrix u = spec.psi_prior ? nuisance_utility_matrix(spec.models, *spec.psi_prior)
                                   : utility_matrix(spec.models, spec.space);
  WeightSelection sel = optimal_weights(u, spec.weights.tie_tol);

  nlohmann::ordered_json doc;
  nlohmann::ordered_json features = nlohmann::ordered_json::array();
  for (const auto& m : spec.models) features.push_back(m.name());
  nlohmann::ordered_json hypotheses = nlohmann::ordered_json::array();
  for (std::size_t j = 1; j < spec.space.size(); ++j) hypotheses.push_back(spec.space.label(j));
  doc["features"] = features;
  doc["hypotheses"] = hypotheses;

  nlohmann::ordered_json util = nlohmann::ordered_json::array();
  nlohmann::ordered_json wm = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < u.feature_count(); ++i) {
    nlohmann::ordered_json urow = nlohmann::ordered_json::array();
    nlohmann::ordered_json wrow = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < u.alternative_count(); ++j) {
      urow.push_back(report::num_or_inf(u(i, j)));
      wrow.push_back(report::round12(sel.matrix(i, j)));
    }
    util.push_back(urow);
    wm.push_back(wrow);
  }
  doc["utility"] = util;
  doc["weights"] = wm;

  nlohmann::ordered_json ties;
  for (std::size_t j = 0; j < sel.tie_sets.size(); ++j) {
    nlohmann::ordered_json names = nlohmann::ordered_json::array();
    for (std::size_t i : sel.tie_sets[j]) names.push_back(spec.models[i].name());
    ties[spec.space.label(j + 1)] = names;
  }
  doc["tie_sets"] = ties;

  nlohmann::ordered_json warnings = nlohmann::ordered_json::array();
  for (std::size_t j = 0; j < sel.invisible.size(); ++j)
    if (sel.invisible[j])
      warnings.push_back("hypothesis '" + spec.space.label(j + 1) +
                         "' is indistinguishable from the reference through every clue; "
                         "weights fall back to uniform");
  doc["warnings"] = warnings;
  return doc.dump(2) + "\n";
}

namespace detail {

inline FiniteDistribution naive_bayes_posterior(const FiniteDistribution& prior,
                                                std::span<const FeatureModel> models,
                                                const CluesObservation& obs) {
  std::vector<double> scores(prior.log_probs());
  for (std::size_t t = 0; t < prior.size(); ++t)
    for (const auto& m : models) scores[t] += feature_log_likelihood(m, t, obs);
  return normalize_log(prior.alphabet(), scores);
}

inline std::size_t map_index(const FiniteDistribution& d) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.size(); ++i)
    if (d.log_prob(i) > d.log_prob(best)) best = i;
  return best;
}

}  // namespace detail

/// Samples N labeled examples from the oracle and scores the classic method
/// ladder against the exact posterior: mean KL to truth, MAP accuracy, and
/// mean log-score.
inline std::string cmd_compare(const ProblemSpec& spec, std::size_t n, std::uint64_t seed,
                               bool as_json) {
  if (!spec.oracle) throw spec_error("spec error: 'compare' needs a generative oracle");
  if (spec.psi_prior)
    throw spec_error("spec error: 'compare' supports nuisance-free problems only");
  if (n == 0) throw spec_error("spec error: 'compare' needs at least one sample");
  const GenerativeOracle& oracle = *spec.oracle;

  UtilityMatrix u = utility_matrix(spec.models, spec.space);
  WeightMatrix w_optimal = optimal_weights(u).matrix;
  std::vector<std::size_t> iota(u.alternative_count(), 0);
  for (std::size_t j = 0; j < u.alternative_count(); ++j)
    for (std::size_t i = 1; i < u.feature_count(); ++i)
      if (u(i, j) > u(iota[j], j)) iota[j] = i;
  WeightMatrix w_pdf = pdf_projection_matrix(iota, u.feature_count());
  std::vector<double> uniform_column(u.feature_count(), 1.0 / double(u.feature_count()));

  const std::vector<std::string> methods = {"naive-bayes", "cl-uniform", "scl-optimal",
                                            "pdf-projection", "true"};
  std::map<std::string, double> mean_kl, accuracy, log_score;
  auto samples = sample_dataset(oracle, n, seed);
  for (const auto& s : samples) {
    FiniteDistribution truth = true_posterior(oracle, s.y);
    for (const auto& method : methods) {
      FiniteDistribution post =
          method == "naive-bayes" ? detail::naive_bayes_posterior(spec.prior, spec.models, s.obs)
          : method == "cl-uniform"
              ? log_linear_pool(spec.prior, spec.models, s.obs, uniform_column)
          : method == "scl-optimal" ? scl_posterior(spec.prior, spec.models, s.obs, w_optimal)
          : method == "pdf-projection" ? scl_posterior(spec.prior, spec.models, s.obs, w_pdf)
                                       : truth;
      mean_kl[method] += kl_divergence(truth, post) / double(n);
      accuracy[method] += detail::map_index(post) == s.theta ? 1.0 / double(n) : 0.0;
      log_score[method] += post.log_prob(s.theta) / double(n);
    }
  }

  if (as_json) {
    nlohmann::ordered_json doc;
    doc["n"] = n;
    doc["seed"] = seed;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& method : methods) {
      nlohmann::ordered_json row;
      row["method"] = method;
      row["mean_kl"] = report::num_or_inf(mean_kl[method]);
      row["accuracy"] = report::round12(accuracy[method]);
      row["mean_log_score"] = report::num_or_inf(log_score[method]);
      rows.push_back(row);
    }
    doc["rows"] = rows;
    return doc.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "method\tmean_kl\taccuracy\tmean_log_score\n";
  for (const auto& method : methods)
    out << method << "\t" << report::fmt12(mean_kl[method]) << "\t"
        << report::fmt12(accuracy[method]) << "\t" << report::fmt12(log_score[method]) << "\n";
  return out.str();
}

/// Draws a labeled dataset as TSV: y, theta, every feature value, conditioning
/// values when present, and the nuisance draw when present.
inline std::string cmd_sample(const ProblemSpec& spec, std::size_t n, std::uint64_t seed) {
  if (!spec.oracle) throw spec_error("spec error: 'sample' needs a generative oracle");
  const GenerativeOracle& oracle = *spec.oracle;
  std::ostringstream out;
  out << "y\ttheta";
  for (std::size_t i = 0; i < oracle.feature_count(); ++i) out << "\tz_" << (i + 1);
  bool any_cond = false;
  for (std::size_t i = 0; i < oracle.feature_count(); ++i)
    if (oracle.conditioning_map(i)) any_cond = true;
  if (any_cond)
    for (std::size_t i = 0; i < oracle.feature_count(); ++i)
      if (oracle.conditioning_map(i)) out << "\tzc_" << (i + 1);
  if (oracle.has_nuisance()) out << "\tpsi";
  out << "\n";
  for (const auto& s : sample_dataset(oracle, n, seed)) {
    out << oracle.y_alphabet()[s.y] << "\t" << oracle.space().label(s.theta);
    for (const auto& v : s.obs.values) out << "\t" << v.symbol;
    if (any_cond)
      for (const auto& v : s.obs.values)
        if (v.conditioner) out << "\t" << *v.conditioner;
    if (s.psi) out << "\t" << oracle.prior_psi()->alphabet()[*s.psi];
    out << "\n";
  }
  return out.str();
}

struct VerifyReport {
  std::string text;
  bool ok = true;
};

namespace detail {

struct VerifyInstance {
  std::map<std::string, bool> results;
  std::string failure_check;
  std::string failure_detail;
  nlohmann::ordered_json replay;
};

inline const std::vector<std::string>& verify_check_names() {
  static const std::vector<std::string> names = {
      "data-reduction", "variation-bound",  "envelope",
      "scl-cl-equivalence", "population-code", "odds-conservation"};
  return names;
}

inline VerifyInstance run_verify_instance(std::uint64_t seed, std::size_t index,
                                          double equivalence_tol) {
  std::seed_seq ss{static_cast<unsigned>(seed & 0xffffffffu),
                   static_cast<unsigned>(seed >> 32), static_cast<unsigned>(index)};
  std::mt19937_64 rng(ss);
  VerifyInstance out;
  for (const auto& name : verify_check_names()) out.results[name] = true;

  GenerativeOracle oracle = random_oracle(rng);
  auto models = derive_feature_models(oracle);
  std::size_t h = oracle.space().size();
  std::size_t n = oracle.feature_count();
  std::size_t ny = oracle.y_alphabet().size();

  auto record_failure = [&](const std::string& check, const std::string& detail,
                            const GenerativeOracle& o) {
    out.results[check] = false;
    if (out.failure_check.empty()) {
      out.failure_check = check;
      out.failure_detail = detail;
      out.replay = nlohmann::ordered_json{
          {"instance", index}, {"check", check}, {"detail", detail},
          {"spec", oracle_to_spec_json(o)}};
    }
  };

  // Data reduction: every feature map plus the forced identity/constant maps.
  {
    std::size_t ta = detail::uniform_size(rng, 0, h - 1);
    std::size_t tb = detail::uniform_size(rng, 0, h - 1);
    const auto& p = oracle.likelihood(ta);
    const auto& ref = oracle.likelihood(tb);
    std::vector<FeatureMapDef> maps;
    for (std::size_t i = 0; i < n; ++i) maps.push_back(oracle.feature_map(i));
    FeatureMapDef identity{"identity", oracle.y_alphabet(), {}};
    identity.code.resize(ny);
    for (std::size_t y = 0; y < ny; ++y) identity.code[y] = y;
    maps.push_back(identity);
    maps.push_back(FeatureMapDef{"constant", {"c"}, std::vector<std::size_t>(ny, 0)});
    for (const auto& f : maps) {
      auto rep = check_data_reduction(p, ref, f);
      bool ok = rep.holds;
      if (f.name == "identity") ok = ok && rep.equality;
      if (f.name == "constant") ok = ok && rep.reduced == 0.0;
      if (!ok)
        record_failure("data-reduction",
                       "map '" + f.name + "' theta_a=" + std::to_string(ta) +
                           " theta_b=" + std::to_string(tb) +
                           " reduced=" + report::fmt12(rep.reduced) +
                           " full=" + report::fmt12(rep.full),
                       oracle);
    }
  }

  // Variation bound for a random hypothesis pair and random simplex weights.
  {
    std::size_t theta = detail::uniform_size(rng, 0, h - 1);
    std::size_t star = detail::uniform_size(rng, 0, h - 1);
    auto w = random_simplex(rng, n);
    auto rep = check_variation_bound(oracle, theta, star, w);
    if (!rep.holds)
      record_failure("variation-bound",
                     "theta=" + std::to_string(theta) + " star=" + std::to_string(star) +
                         " middle=" + report::fmt12(rep.middle) +
                         " upper=" + report::fmt12(rep.upper),
                     oracle);
  }

  // Envelope domination: E[log SCL(theta, W)] <= M(theta) <= M(theta*).
  {
    std::size_t star = detail::uniform_size(rng, 0, h - 1);
    WeightMatrix w = random_weight_matrix(rng, n, h - 1);
    double m_star = consistency_envelope(oracle, star, star);
    for (std::size_t theta = 0; theta < h; ++theta) {
      double m_theta = consistency_envelope(oracle, theta, star);
      double e = expected_log_scl(oracle, theta, star, w);
      if (!(m_theta <= m_star + 1e-12) || !(e <= m_theta + 1e-12))
        record_failure("envelope",
                       "theta=" + std::to_string(theta) + " star=" + std::to_string(star) +
                           " E=" + report::fmt12(e) + " M=" + report::fmt12(m_theta) +
                           " M*=" + report::fmt12(m_star),
                       oracle);
    }
  }

  // Constant-column SCL equals the plain log-linear pool, and the literal
  // population-code posterior equals direct Bayes.
  {
    std::size_t theta = detail::sample_index(oracle.prior_theta(), rng);
    std::size_t y = detail::sample_index(oracle.likelihood(theta), rng);
    auto obs = oracle.observation_for(y);
    auto w = random_simplex(rng, n);
    auto scl_post = scl_posterior(oracle.prior_theta(), models, obs,
                                  WeightMatrix::constant_columns(w, h - 1));
    auto pool_post = log_linear_pool(oracle.prior_theta(), models, obs, w);
    double gap = max_norm_distance(scl_post, pool_post);
    if (!(gap <= equivalence_tol))
      record_failure("scl-cl-equivalence",
                     "y=" + std::to_string(y) + " max-norm=" + report::fmt12(gap), oracle);

    auto pop = population_code_posterior(oracle, y, oracle.prior_theta());
    auto truth = true_posterior(oracle, y);
    double gap2 = max_norm_distance(pop, truth);
    if (!(gap2 <= equivalence_tol))
      record_failure("population-code",
                     "y=" + std::to_string(y) + " max-norm=" + report::fmt12(gap2), oracle);
  }

  // Odds conservation on a fresh nuisance-bearing instance.
  {
    RandomOracleConfig cfg;
    cfg.psi_points = 1 + detail::uniform_size(rng, 1, 3);
    GenerativeOracle npsi = random_oracle(rng, cfg);
    auto nmodels = derive_feature_models(npsi);
    std::size_t nh = npsi.space().size();
    WeightMatrix w = random_weight_matrix(rng, npsi.feature_count(), nh - 1);
    std::size_t theta = detail::sample_index(npsi.prior_theta(), rng);
    std::size_t psi = detail::sample_index(*npsi.prior_psi(), rng);
    std::size_t y = detail::sample_index(npsi.likelihood(theta, psi), rng);
    auto obs = npsi.observation_for(y);
    for (std::size_t j = 1; j < nh; ++j) {
      auto col = w.column(j - 1);
      double sce = super_composite_evidence_log(nmodels, j, obs, w, *npsi.prior_psi());
      double ce0 = composite_evidence_log(nmodels, 0, obs, col, *npsi.prior_psi());
      double cej = composite_evidence_log(nmodels, j, obs, col, *npsi.prior_psi());
      double rel = std::abs(std::exp(sce + ce0 - cej) - 1.0);
      if (!(rel < 1e-10))
        record_failure("odds-conservation",
                       "j=" + std::to_string(j) + " rel_err=" + report::fmt12(rel), npsi);
    }
  }

  return out;
}

}  // namespace detail

/// Runs the randomized invariant suites over `instances` seeded random
/// oracles, fanning out across `workers` threads; per-check pass counts are
/// reported in instance order and the first failing instance is serialized
/// for replay.
inline VerifyReport cmd_verify(std::uint64_t seed, std::size_t instances, std::size_t workers = 1,
                               double equivalence_tol = 1e-12) {
  std::vector<detail::VerifyInstance> results(instances);
  workers = std::max<std::size_t>(1, std::min(workers, std::max<std::size_t>(instances, 1)));
  if (workers == 1) {
    for (std::size_t k = 0; k < instances; ++k)
      results[k] = detail::run_verify_instance(seed, k, equivalence_tol);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t)
      pool.emplace_back([&, t]() {
        for (std::size_t k = t; k < instances; k += workers)
          results[k] = detail::run_verify_instance(seed, k, equivalence_tol);
      });
    for (auto& th : pool) th.join();
  }

  std::map<std::string, std::size_t> passed;
  for (const auto& name : detail::verify_check_names()) passed[name] = 0;
  const detail::VerifyInstance* first_failure = nullptr;
  for (const auto& r : results) {
    for (const auto& [name, ok] : r.results)
      if (ok) ++passed[name];
    if (!r.failure_check.empty() && first_failure == nullptr) first_failure = &r;
  }

  VerifyReport rep;
  std::ostringstream out;
  out << "check\tinstances\tpassed\n";
  for (const auto& name : detail::verify_check_names())
    out << name << "\t" << instances << "\t" << passed[name] << "\n";
  if (first_failure != nullptr) {
    rep.ok = false;
    out << "result\tFAIL\t" << first_failure->failure_check << ": "
        << first_failure->failure_detail << "\n";
    out << "replay\t" << first_failure->replay.dump() << "\n";
  } else {
    out << "result\tPASS\n";
  }
  rep.text = out.str();
  return rep;
}

}  // namespace sclkit
