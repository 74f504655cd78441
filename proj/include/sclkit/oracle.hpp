#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sclkit/core.hpp"
#include "sclkit/pool.hpp"

namespace sclkit {

/// Deterministic feature extraction f: Y -> A, stored as an index map.
struct FeatureMapDef {
  std::string name;
  std::vector<std::string> alphabet;
  std::vector<std::size_t> code;  // y index -> alphabet index
};

// Desk-scale caps; exact enumeration over the full model stays cheap below
// these and the verification suites rely on that.
inline constexpr std::size_t kMaxYSize = 10000;
inline constexpr std::size_t kMaxHypotheses = 64;
inline constexpr std::size_t kMaxNuisancePoints = 64;
inline constexpr std::size_t kMaxFeatureSymbols = 256;

/// Full generative model on a finite observable alphabet Y: sampling tables
/// p(y|theta[,psi]), deterministic feature maps, and the priors. Everything
/// downstream can be checked exactly against this object.
class GenerativeOracle {
 public:
  GenerativeOracle(HypothesisSpace space, std::vector<std::string> y_alphabet,
                   std::vector<FiniteDistribution> likelihood,
                   std::vector<FeatureMapDef> feature_maps,
                   std::vector<std::optional<FeatureMapDef>> conditioning_maps,
                   FiniteDistribution prior_theta,
                   std::optional<FiniteDistribution> prior_psi = std::nullopt)
      : space_(std::move(space)),
        y_alphabet_(std::move(y_alphabet)),
        likelihood_(std::move(likelihood)),
        feature_maps_(std::move(feature_maps)),
        conditioning_maps_(std::move(conditioning_maps)),
        prior_theta_(std::move(prior_theta)),
        prior_psi_(std::move(prior_psi)) {
    if (y_alphabet_.empty()) raise(errc::invalid_distribution, "Y alphabet is empty");
    if (y_alphabet_.size() > kMaxYSize)
      raise(errc::size_limit_exceeded, "|Y| exceeds the desk-scale cap of 10000");
    if (space_.size() > kMaxHypotheses)
      raise(errc::size_limit_exceeded, "hypothesis count exceeds the desk-scale cap of 64");
    if (prior_psi_ && prior_psi_->size() > kMaxNuisancePoints)
      raise(errc::size_limit_exceeded, "nuisance grid exceeds the desk-scale cap of 64");
    if (likelihood_.size() != space_.size() * psi_slots())
      raise(errc::dimension_mismatch, "likelihood table size does not match |Theta| x |Psi|");
    for (const auto& row : likelihood_)
      if (row.alphabet() != y_alphabet_)
        raise(errc::alphabet_mismatch, "likelihood rows must be distributions over Y");
    if (prior_theta_.alphabet() != space_.labels())
      raise(errc::alphabet_mismatch, "theta prior must be a distribution over the hypothesis labels");
    if (feature_maps_.empty()) raise(errc::dimension_mismatch, "oracle needs at least one feature map");
    if (!conditioning_maps_.empty() && conditioning_maps_.size() != feature_maps_.size())
      raise(errc::dimension_mismatch, "conditioning map list must match the feature map list");
    for (const auto& f : feature_maps_) check_map(f);
    for (const auto& f : conditioning_maps_)
      if (f) check_map(*f);
  }

  const HypothesisSpace& space() const { return space_; }
  const std::vector<std::string>& y_alphabet() const { return y_alphabet_; }
  std::size_t feature_count() const { return feature_maps_.size(); }
  bool has_nuisance() const { return prior_psi_.has_value(); }
  std::size_t psi_slots() const { return prior_psi_ ? prior_psi_->size() : 1; }
  const FiniteDistribution& prior_theta() const { return prior_theta_; }
  const std::optional<FiniteDistribution>& prior_psi() const { return prior_psi_; }
  const FeatureMapDef& feature_map(std::size_t i) const { return feature_maps_.at(i); }

  const std::optional<FeatureMapDef>& conditioning_map(std::size_t i) const {
    static const std::optional<FeatureMapDef> none;
    if (conditioning_maps_.empty()) return none;
    return conditioning_maps_.at(i);
  }

  const FiniteDistribution& likelihood(std::size_t theta,
                                       std::optional<std::size_t> psi = std::nullopt) const {
    if (theta >= space_.size()) raise(errc::index_out_of_range, "hypothesis index out of range");
    std::size_t p = 0;
    if (has_nuisance()) {
      if (!psi) raise(errc::missing_nuisance, "oracle likelihood requires a nuisance index");
      if (*psi >= psi_slots()) raise(errc::index_out_of_range, "nuisance index out of range");
      p = *psi;
    }
    return likelihood_[theta * psi_slots() + p];
  }

  std::optional<std::size_t> y_index(std::string_view symbol) const {
    for (std::size_t i = 0; i < y_alphabet_.size(); ++i)
      if (y_alphabet_[i] == symbol) return i;
    return std::nullopt;
  }

  /// log p(y|theta) with any nuisance parameter integrated out against its prior.
  std::vector<double> marginal_y_log(std::size_t theta) const {
    if (!has_nuisance()) return likelihood(theta).log_probs();
    std::vector<double> out(y_alphabet_.size());
    std::vector<double> terms(psi_slots());
    for (std::size_t y = 0; y < y_alphabet_.size(); ++y) {
      for (std::size_t p = 0; p < psi_slots(); ++p)
        terms[p] = prior_psi_->log_prob(p) + likelihood(theta, p).log_prob(y);
      out[y] = logsumexp(terms);
    }
    return out;
  }

  /// Applies every feature (and conditioning) map to a data point.
  CluesObservation observation_for(std::size_t y) const {
    if (y >= y_alphabet_.size()) raise(errc::index_out_of_range, "data index out of range");
    CluesObservation obs;
    obs.values.reserve(feature_maps_.size());
    for (std::size_t i = 0; i < feature_maps_.size(); ++i) {
      ObservedValue v;
      v.symbol = feature_maps_[i].alphabet[feature_maps_[i].code[y]];
      if (const auto& cm = conditioning_map(i)) v.conditioner = cm->alphabet[cm->code[y]];
      obs.values.push_back(std::move(v));
    }
    return obs;
  }

 private:
  void check_map(const FeatureMapDef& f) const {
    if (f.alphabet.empty()) raise(errc::invalid_distribution, "feature map alphabet is empty");
    if (f.alphabet.size() > kMaxFeatureSymbols)
      raise(errc::size_limit_exceeded, "feature alphabet exceeds the desk-scale cap of 256");
    if (f.code.size() != y_alphabet_.size())
      raise(errc::dimension_mismatch, "feature map '" + f.name + "' is not total on Y");
    for (std::size_t z : f.code)
      if (z >= f.alphabet.size())
        raise(errc::index_out_of_range, "feature map '" + f.name + "' codes outside its alphabet");
  }

  HypothesisSpace space_;
  std::vector<std::string> y_alphabet_;
  std::vector<FiniteDistribution> likelihood_;
  std::vector<FeatureMapDef> feature_maps_;
  std::vector<std::optional<FeatureMapDef>> conditioning_maps_;
  FiniteDistribution prior_theta_;
  std::optional<FiniteDistribution> prior_psi_;
};

/// Pushforward of p(y|theta[,psi]) through feature map i; the conditional
/// variant renormalizes within the level set of the conditioning value.
inline FiniteDistribution induced_distribution(const GenerativeOracle& oracle, std::size_t i,
                                               std::size_t theta,
                                               std::optional<std::size_t> psi = std::nullopt,
                                               std::optional<std::size_t> conditioner = std::nullopt) {
  if (i >= oracle.feature_count()) raise(errc::index_out_of_range, "feature index out of range");
  const FeatureMapDef& f = oracle.feature_map(i);
  const FiniteDistribution& row = oracle.likelihood(theta, psi);
  std::vector<double> mass(f.alphabet.size(), 0.0);
  if (conditioner) {
    const auto& cm = oracle.conditioning_map(i);
    if (!cm)
      raise(errc::missing_conditioner,
            "feature '" + f.name + "' has no conditioning map");
    if (*conditioner >= cm->alphabet.size())
      raise(errc::index_out_of_range, "conditioner index out of range");
    double norm = 0.0;
    for (std::size_t y = 0; y < row.size(); ++y) {
      if (cm->code[y] != *conditioner) continue;
      double p = row.prob(y);
      mass[f.code[y]] += p;
      norm += p;
    }
    if (norm <= 0.0)
      raise(errc::empty_conditioning_set,
            "conditioning value '" + cm->alphabet[*conditioner] + "' has zero probability");
    for (double& m : mass) m /= norm;
  } else {
    for (std::size_t y = 0; y < row.size(); ++y) mass[f.code[y]] += row.prob(y);
  }
  return FiniteDistribution::from_probs(f.alphabet, mass);
}

/// Builds the per-clue sampling tables that the inference side consumes; every
/// row is re-marginalized exactly from the generative model.
inline std::vector<FeatureModel> derive_feature_models(const GenerativeOracle& oracle) {
  std::vector<FeatureModel> models;
  models.reserve(oracle.feature_count());
  std::optional<std::vector<std::string>> grid;
  if (oracle.has_nuisance()) grid = oracle.prior_psi()->alphabet();
  for (std::size_t i = 0; i < oracle.feature_count(); ++i) {
    const FeatureMapDef& f = oracle.feature_map(i);
    const auto& cm = oracle.conditioning_map(i);
    std::optional<std::vector<std::string>> cond;
    if (cm) cond = cm->alphabet;
    std::size_t psi_slots = oracle.has_nuisance() ? oracle.psi_slots() : 1;
    std::size_t cond_slots = cm ? cm->alphabet.size() : 1;
    std::vector<FiniteDistribution> table;
    table.reserve(oracle.space().size() * psi_slots * cond_slots);
    for (std::size_t t = 0; t < oracle.space().size(); ++t)
      for (std::size_t p = 0; p < psi_slots; ++p)
        for (std::size_t c = 0; c < cond_slots; ++c)
          table.push_back(induced_distribution(
              oracle, i, t, oracle.has_nuisance() ? std::optional<std::size_t>(p) : std::nullopt,
              cm ? std::optional<std::size_t>(c) : std::nullopt));
    models.emplace_back(i, f.name, oracle.space().size(), f.alphabet, std::move(cond),
                        grid, std::move(table));
  }
  return models;
}

/// Exact Bayes posterior pi(theta) p(y|theta) / p(y), nuisance integrated out.
inline FiniteDistribution true_posterior(const GenerativeOracle& oracle, std::size_t y) {
  if (y >= oracle.y_alphabet().size()) raise(errc::index_out_of_range, "data index out of range");
  std::vector<double> scores(oracle.space().size());
  for (std::size_t t = 0; t < scores.size(); ++t)
    scores[t] = oracle.prior_theta().log_prob(t) + oracle.marginal_y_log(t)[y];
  double total = logsumexp(scores);
  if (total == -kInfinity)
    raise(errc::zero_marginal_data, "observed data has zero probability under the prior mixture");
  return normalize_log(oracle.space().labels(), scores);
}

inline FiniteDistribution true_posterior(const GenerativeOracle& oracle, std::string_view y_symbol) {
  auto y = oracle.y_index(y_symbol);
  if (!y) raise(errc::symbol_not_in_alphabet, "unknown data symbol '" + std::string(y_symbol) + "'");
  return true_posterior(oracle, *y);
}

/// Exact Bayes posterior given the extracted clue values only:
/// pi(theta) * p(z_1..z_n | theta), enumerated over the matching level set.
inline FiniteDistribution joint_feature_posterior(const GenerativeOracle& oracle,
                                                  const CluesObservation& obs) {
  if (obs.values.size() != oracle.feature_count())
    raise(errc::dimension_mismatch, "observation does not cover every feature");
  std::vector<std::size_t> want(oracle.feature_count());
  std::vector<std::optional<std::size_t>> want_cond(oracle.feature_count());
  for (std::size_t i = 0; i < oracle.feature_count(); ++i) {
    const FeatureMapDef& f = oracle.feature_map(i);
    bool found = false;
    for (std::size_t z = 0; z < f.alphabet.size(); ++z)
      if (f.alphabet[z] == obs.values[i].symbol) {
        want[i] = z;
        found = true;
        break;
      }
    if (!found)
      raise(errc::symbol_not_in_alphabet,
            "feature '" + f.name + "': symbol '" + obs.values[i].symbol + "' not in alphabet");
    if (obs.values[i].conditioner) {
      const auto& cm = oracle.conditioning_map(i);
      if (!cm) raise(errc::missing_conditioner, "feature '" + f.name + "' has no conditioning map");
      bool cfound = false;
      for (std::size_t c = 0; c < cm->alphabet.size(); ++c)
        if (cm->alphabet[c] == *obs.values[i].conditioner) {
          want_cond[i] = c;
          cfound = true;
          break;
        }
      if (!cfound)
        raise(errc::symbol_not_in_alphabet, "feature '" + f.name + "': unknown conditioning symbol");
    }
  }
  std::vector<double> mass(oracle.space().size(), 0.0);
  for (std::size_t t = 0; t < oracle.space().size(); ++t) {
    std::vector<double> ly = oracle.marginal_y_log(t);
    double acc = 0.0;
    for (std::size_t y = 0; y < oracle.y_alphabet().size(); ++y) {
      bool match = true;
      for (std::size_t i = 0; i < oracle.feature_count() && match; ++i) {
        if (oracle.feature_map(i).code[y] != want[i]) match = false;
        if (match && want_cond[i] && oracle.conditioning_map(i)->code[y] != *want_cond[i])
          match = false;
      }
      if (match) acc += std::exp(ly[y]);
    }
    mass[t] = oracle.prior_theta().prob(t) * acc;
  }
  double total = 0.0;
  for (double m : mass) total += m;
  if (total <= 0.0)
    raise(errc::zero_marginal_data, "observed clue values have zero probability");
  for (double& m : mass) m /= total;
  return FiniteDistribution::from_probs(oracle.space().labels(), mass);
}

/// Expected utility of the un-reduced data: sum_j pi(theta_j) D(p(y|theta_j) || p(y|theta_0)).
inline double u_star(const GenerativeOracle& oracle) {
  if (oracle.has_nuisance())
    raise(errc::unsupported_model, "u_star is defined for nuisance-free oracles");
  double acc = 0.0;
  for (std::size_t j = 1; j < oracle.space().size(); ++j) {
    double pj = oracle.prior_theta().prob(j);
    if (pj == 0.0) continue;
    double d = kl_divergence(oracle.likelihood(j), oracle.likelihood(0));
    if (d == kInfinity) return kInfinity;
    acc += pj * d;
  }
  return acc;
}

struct DataReductionReport {
  double reduced = 0.0;  // D(p~ || pi~) after feature extraction
  double full = 0.0;     // D(p || pi) on the raw alphabet
  bool holds = false;    // 0 <= reduced <= full (1e-12 slack)
  bool equality = false; // |reduced - full| < 1e-10, i.e. sufficiency
};

/// Checks that KL divergence cannot increase under deterministic feature
/// extraction, computing both sides exactly.
inline DataReductionReport check_data_reduction(const FiniteDistribution& p,
                                                const FiniteDistribution& reference,
                                                const FeatureMapDef& f) {
  if (p.alphabet() != reference.alphabet())
    raise(errc::alphabet_mismatch, "data reduction check requires a shared alphabet");
  if (f.code.size() != p.size())
    raise(errc::dimension_mismatch, "feature map is not total on the data alphabet");
  std::vector<double> pm(f.alphabet.size(), 0.0), rm(f.alphabet.size(), 0.0);
  for (std::size_t y = 0; y < p.size(); ++y) {
    pm[f.code[y]] += p.prob(y);
    rm[f.code[y]] += reference.prob(y);
  }
  DataReductionReport rep;
  rep.full = kl_divergence(p, reference);
  rep.reduced = kl_divergence(FiniteDistribution::from_probs(f.alphabet, pm),
                              FiniteDistribution::from_probs(f.alphabet, rm));
  rep.holds = rep.reduced >= 0.0 && rep.reduced <= rep.full + 1e-12;
  rep.equality = (std::isinf(rep.reduced) && std::isinf(rep.full)) ||
                 std::abs(rep.reduced - rep.full) < 1e-10;
  return rep;
}

struct VariationBoundReport {
  double middle = 0.0;  // E[log L_c(theta*,w) / L_c(theta,w)] under p(y|theta*)
  double upper = 0.0;   // E[log L(theta*) / L(theta)] under p(y|theta*)
  bool lower_ok = false;
  bool holds = false;
};

/// Brackets the expected log composite-likelihood ratio between 0 and the true
/// expected log-likelihood ratio, by exact enumeration over Y.
inline VariationBoundReport check_variation_bound(const GenerativeOracle& oracle, std::size_t theta,
                                                  std::size_t theta_star, std::span<const double> w) {
  if (oracle.has_nuisance())
    raise(errc::unsupported_model, "variation bound is defined for nuisance-free oracles");
  if (w.size() != oracle.feature_count())
    raise(errc::weight_dimension_mismatch, "weight vector length does not match the clue count");
  if (!validate_simplex(w, kInputSimplexTol))
    raise(errc::invalid_weights, "clue weights must lie on the simplex");
  std::vector<std::vector<double>> lt_star(oracle.feature_count()), lt(oracle.feature_count());
  for (std::size_t i = 0; i < oracle.feature_count(); ++i) {
    lt_star[i] = induced_distribution(oracle, i, theta_star).log_probs();
    lt[i] = induced_distribution(oracle, i, theta).log_probs();
  }
  const FiniteDistribution& py_star = oracle.likelihood(theta_star);
  const FiniteDistribution& py = oracle.likelihood(theta);
  VariationBoundReport rep;
  for (std::size_t y = 0; y < py_star.size(); ++y) {
    double p = py_star.prob(y);
    if (p == 0.0) continue;
    double inner = 0.0;
    for (std::size_t i = 0; i < oracle.feature_count(); ++i) {
      if (w[i] == 0.0) continue;
      std::size_t z = oracle.feature_map(i).code[y];
      if (lt[i][z] == -kInfinity) {
        inner = kInfinity;
        break;
      }
      inner += w[i] * (lt_star[i][z] - lt[i][z]);
    }
    rep.middle += p * inner;
    rep.upper += py.log_prob(y) == -kInfinity ? kInfinity
                                              : p * (py_star.log_prob(y) - py.log_prob(y));
  }
  rep.lower_ok = rep.middle >= -1e-12;
  rep.holds = rep.lower_ok && rep.middle <= rep.upper + 1e-12;
  return rep;
}

/// One labeled draw from the generative model, with every feature extracted.
struct OracleSample {
  std::size_t y = 0;
  std::size_t theta = 0;
  std::optional<std::size_t> psi;
  CluesObservation obs;
};

namespace detail {

// Portable uniform in [0,1): 53 random mantissa bits from the engine's output,
// so datasets are reproducible across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t sample_index(const FiniteDistribution& d, std::mt19937_64& rng) {
  double u = uniform01(rng);
  double c = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double p = d.prob(i);
    if (p <= 0.0) continue;
    last_positive = i;
    c += p;
    if (u < c) return i;
  }
  return last_positive;
}

inline std::size_t uniform_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  if (hi <= lo) return lo;
  auto span = hi - lo + 1;
  auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(span));
  return lo + std::min(k, span - 1);
}

}  // namespace detail

/// N i.i.d. draws theta ~ pi, [psi ~ pi(psi)], y ~ p(y|theta[,psi]);
/// deterministic given the seed.
inline std::vector<OracleSample> sample_dataset(const GenerativeOracle& oracle, std::size_t n,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<OracleSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    OracleSample s;
    s.theta = detail::sample_index(oracle.prior_theta(), rng);
    if (oracle.has_nuisance()) s.psi = detail::sample_index(*oracle.prior_psi(), rng);
    s.y = detail::sample_index(oracle.likelihood(s.theta, s.psi), rng);
    s.obs = oracle.observation_for(s.y);
    out.push_back(std::move(s));
  }
  return out;
}

/// Flat-Dirichlet draw on the n-simplex (normalized unit exponentials).
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  double sum = 0.0;
  for (double& x : v) {
    double u = static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    x = -std::log(u);
    sum += x;
  }
  if (sum <= 0.0) {
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(n));
    return v;
  }
  for (double& x : v) x /= sum;
  return v;
}

inline WeightMatrix random_weight_matrix(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::vector<std::vector<double>> cols(m);
  for (auto& c : cols) c = random_simplex(rng, n);
  return WeightMatrix::from_columns(cols);
}

struct RandomOracleConfig {
  std::size_t min_hypotheses = 2;
  std::size_t max_hypotheses = 5;
  std::size_t min_features = 1;
  std::size_t max_features = 4;
  std::size_t min_y = 4;
  std::size_t max_y = 12;
  std::size_t min_symbols = 2;
  std::size_t max_symbols = 4;
  std::size_t psi_points = 0;  // 0 = nuisance-free
};

/// Seeded random instance: flat-Dirichlet sampling tables and priors, feature
/// maps drawn as random surjections.
inline GenerativeOracle random_oracle(std::mt19937_64& rng, const RandomOracleConfig& cfg = {}) {
  std::size_t h = detail::uniform_size(rng, cfg.min_hypotheses, cfg.max_hypotheses);
  std::size_t n = detail::uniform_size(rng, cfg.min_features, cfg.max_features);
  std::size_t ny = detail::uniform_size(rng, cfg.min_y, cfg.max_y);

  std::vector<std::string> labels(h), ys(ny);
  for (std::size_t i = 0; i < h; ++i) labels[i] = "h" + std::to_string(i);
  for (std::size_t i = 0; i < ny; ++i) ys[i] = "y" + std::to_string(i);

  std::optional<FiniteDistribution> prior_psi;
  std::size_t psi_slots = 1;
  if (cfg.psi_points > 0) {
    psi_slots = cfg.psi_points;
    std::vector<std::string> grid(psi_slots);
    for (std::size_t i = 0; i < psi_slots; ++i) grid[i] = "psi" + std::to_string(i);
    auto p = random_simplex(rng, psi_slots);
    prior_psi = FiniteDistribution::from_probs(std::move(grid), p);
  }

  std::vector<FiniteDistribution> likelihood;
  likelihood.reserve(h * psi_slots);
  for (std::size_t t = 0; t < h * psi_slots; ++t)
    likelihood.push_back(FiniteDistribution::from_probs(ys, random_simplex(rng, ny)));

  std::vector<FeatureMapDef> maps(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = detail::uniform_size(rng, cfg.min_symbols, std::min(cfg.max_symbols, ny));
    FeatureMapDef f;
    f.name = "z" + std::to_string(i + 1);
    f.alphabet.resize(k);
    for (std::size_t s = 0; s < k; ++s) f.alphabet[s] = "s" + std::to_string(s);
    // Surjection: a random permutation pins each symbol to at least one y,
    // the remaining ys get uniform symbols.
    std::vector<std::size_t> perm(ny);
    for (std::size_t y = 0; y < ny; ++y) perm[y] = y;
    for (std::size_t y = ny; y > 1; --y)
      std::swap(perm[y - 1], perm[detail::uniform_size(rng, 0, y - 1)]);
    f.code.assign(ny, 0);
    for (std::size_t y = 0; y < ny; ++y) f.code[y] = detail::uniform_size(rng, 0, k - 1);
    for (std::size_t s = 0; s < k; ++s) f.code[perm[s]] = s;
    maps[i] = std::move(f);
  }

  auto prior = FiniteDistribution::from_probs(labels, random_simplex(rng, h));
  return GenerativeOracle(HypothesisSpace(labels), ys, std::move(likelihood), std::move(maps), {},
                          std::move(prior), std::move(prior_psi));
}

}  // namespace sclkit
