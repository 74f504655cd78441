#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sclkit {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Simplex tolerances: user-supplied vectors get 1e-9, internally produced
// distributions must stay within 1e-10.
inline constexpr double kInputSimplexTol = 1e-9;
inline constexpr double kInternalSimplexTol = 1e-10;

enum class errc {
  invalid_distribution,
  invalid_hypothesis_space,
  invalid_weights,
  alphabet_mismatch,
  all_zero_mass,
  weight_dimension_mismatch,
  dimension_mismatch,
  symbol_not_in_alphabet,
  missing_conditioner,
  missing_nuisance,
  indeterminate_ratio,
  reference_prior_zero,
  reference_likelihood_zero,
  reference_evidence_zero,
  index_out_of_range,
  empty_sample,
  empty_conditioning_set,
  zero_marginal_data,
  size_limit_exceeded,
  unsupported_model,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::invalid_distribution: return "InvalidDistribution";
    case errc::invalid_hypothesis_space: return "InvalidHypothesisSpace";
    case errc::invalid_weights: return "InvalidWeights";
    case errc::alphabet_mismatch: return "AlphabetMismatch";
    case errc::all_zero_mass: return "AllZeroMass";
    case errc::weight_dimension_mismatch: return "WeightDimensionMismatch";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::symbol_not_in_alphabet: return "SymbolNotInAlphabet";
    case errc::missing_conditioner: return "MissingConditioner";
    case errc::missing_nuisance: return "MissingNuisance";
    case errc::indeterminate_ratio: return "IndeterminateRatio";
    case errc::reference_prior_zero: return "ReferencePriorZero";
    case errc::reference_likelihood_zero: return "ReferenceLikelihoodZero";
    case errc::reference_evidence_zero: return "ReferenceEvidenceZero";
    case errc::index_out_of_range: return "IndexOutOfRange";
    case errc::empty_sample: return "EmptySample";
    case errc::empty_conditioning_set: return "EmptyConditioningSet";
    case errc::zero_marginal_data: return "ZeroMarginalData";
    case errc::size_limit_exceeded: return "SizeLimitExceeded";
    case errc::unsupported_model: return "UnsupportedModel";
  }
  return "UnknownError";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& what) { throw error(code, what); }

/// True iff all entries are >= -tol and the entries sum to 1 within tol.
inline bool validate_simplex(std::span<const double> v, double tol) {
  double sum = 0.0;
  for (double x : v) {
    if (std::isnan(x) || x < -tol) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

/// log(sum(exp(v))) computed with a max shift; -inf entries are allowed and an
/// all-(-inf) input yields -inf.
inline double logsumexp(std::span<const double> v) {
  double m = -kInfinity;
  for (double x : v) m = std::max(m, x);
  if (m == -kInfinity) return -kInfinity;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

/// Ordered set of hypothesis labels; index 0 is the reference hypothesis.
class HypothesisSpace {
 public:
  static constexpr std::size_t reference_index = 0;

  explicit HypothesisSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.size() < 2)
      raise(errc::invalid_hypothesis_space, "need at least two hypotheses including the reference");
    for (std::size_t a = 0; a < labels_.size(); ++a)
      for (std::size_t b = a + 1; b < labels_.size(); ++b)
        if (labels_[a] == labels_[b])
          raise(errc::invalid_hypothesis_space, "duplicate hypothesis label '" + labels_[a] + "'");
  }

  /// Reorders `labels` so that `reference` sits at index 0, keeping the
  /// relative order of the remaining hypotheses.
  static HypothesisSpace with_reference(std::vector<std::string> labels, std::string_view reference) {
    auto it = std::find(labels.begin(), labels.end(), reference);
    if (it == labels.end())
      raise(errc::invalid_hypothesis_space,
            "reference '" + std::string(reference) + "' is not among the hypothesis labels");
    std::rotate(labels.begin(), it, it + 1);
    return HypothesisSpace(std::move(labels));
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t alternative_count() const { return labels_.size() - 1; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }

  std::optional<std::size_t> index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return i;
    return std::nullopt;
  }

 private:
  std::vector<std::string> labels_;
};

/// Categorical distribution over a labeled alphabet, stored in log domain.
/// Zero probability (-inf) is representable; NaN and +inf are not.
class FiniteDistribution {
 public:
  FiniteDistribution(std::vector<std::string> alphabet, std::vector<double> log_probs)
      : alphabet_(std::move(alphabet)), log_probs_(std::move(log_probs)) {
    if (alphabet_.empty() || alphabet_.size() != log_probs_.size())
      raise(errc::invalid_distribution, "alphabet and log-probability sizes disagree");
    double sum = 0.0;
    for (double lp : log_probs_) {
      if (std::isnan(lp) || lp == kInfinity)
        raise(errc::invalid_distribution, "log-probabilities must be finite or -inf");
      sum += std::exp(lp);
    }
    if (std::abs(sum - 1.0) > kInternalSimplexTol)
      raise(errc::invalid_distribution,
            "probabilities sum to " + std::to_string(sum) + ", expected 1");
  }

  /// Builds from linear-domain probabilities. Accepts data-entry slop up to
  /// `tol` and renormalizes exactly; entries within [-tol, 0) are clamped to 0.
  static FiniteDistribution from_probs(std::vector<std::string> alphabet,
                                       std::span<const double> probs,
                                       double tol = kInputSimplexTol) {
    if (!validate_simplex(probs, tol))
      raise(errc::invalid_distribution, "probability vector is not on the simplex");
    double sum = 0.0;
    for (double p : probs) sum += std::max(p, 0.0);
    if (sum <= 0.0) raise(errc::invalid_distribution, "probability vector has no mass");
    std::vector<double> lp(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      double p = std::max(probs[i], 0.0) / sum;
      lp[i] = p > 0.0 ? std::log(p) : -kInfinity;
    }
    return FiniteDistribution(std::move(alphabet), std::move(lp));
  }

  static FiniteDistribution uniform(std::vector<std::string> alphabet) {
    std::vector<double> lp(alphabet.size(), -std::log(static_cast<double>(alphabet.size())));
    return FiniteDistribution(std::move(alphabet), std::move(lp));
  }

  std::size_t size() const { return log_probs_.size(); }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<double>& log_probs() const { return log_probs_; }
  double log_prob(std::size_t i) const { return log_probs_.at(i); }
  double prob(std::size_t i) const { return std::exp(log_probs_.at(i)); }

  std::vector<double> probs() const {
    std::vector<double> out(log_probs_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_probs_[i]);
    return out;
  }

  std::optional<std::size_t> index_of(std::string_view symbol) const {
    for (std::size_t i = 0; i < alphabet_.size(); ++i)
      if (alphabet_[i] == symbol) return i;
    return std::nullopt;
  }

  /// Shannon entropy in nats.
  double entropy() const {
    double h = 0.0;
    for (double lp : log_probs_)
      if (lp != -kInfinity) h -= std::exp(lp) * lp;
    return h;
  }

 private:
  std::vector<std::string> alphabet_;
  std::vector<double> log_probs_;
};

/// Normalizes a vector of log-values into probabilities via max-shift, stable
/// for inputs spanning hundreds of log-units.
inline std::vector<double> normalize_log(std::span<const double> v) {
  if (v.empty()) raise(errc::invalid_distribution, "cannot normalize an empty vector");
  double m = -kInfinity;
  for (double x : v) {
    if (std::isnan(x) || x == kInfinity)
      raise(errc::invalid_distribution, "log-values must be finite or -inf");
    m = std::max(m, x);
  }
  if (m == -kInfinity) raise(errc::all_zero_mass, "every log-value is -inf");
  double sum = 0.0;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

inline FiniteDistribution normalize_log(std::vector<std::string> alphabet, std::span<const double> v) {
  auto probs = normalize_log(v);
  std::vector<double> lp(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    lp[i] = probs[i] > 0.0 ? std::log(probs[i]) : -kInfinity;
  return FiniteDistribution(std::move(alphabet), std::move(lp));
}

/// KL divergence D(p || q) in nats, with 0*log(0/q) = 0 and p>0, q=0 => +inf.
inline double kl_divergence(const FiniteDistribution& p, const FiniteDistribution& q) {
  if (p.alphabet() != q.alphabet())
    raise(errc::alphabet_mismatch, "KL divergence requires a shared alphabet");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double lp = p.log_prob(i);
    if (lp == -kInfinity) continue;
    double lq = q.log_prob(i);
    if (lq == -kInfinity) return kInfinity;
    acc += std::exp(lp) * (lp - lq);
  }
  return std::max(acc, 0.0);
}

/// Largest absolute probability gap between two distributions on one alphabet.
inline double max_norm_distance(const FiniteDistribution& p, const FiniteDistribution& q) {
  if (p.alphabet() != q.alphabet())
    raise(errc::alphabet_mismatch, "distance requires a shared alphabet");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d = std::max(d, std::abs(p.prob(i) - q.prob(i)));
  return d;
}

/// n x m matrix of non-negative clue weights; every column lies on the
/// n-dimensional simplex. Column j weighs the clues for hypothesis j+1
/// (the reference hypothesis carries no column).
class WeightMatrix {
 public:
  WeightMatrix(std::size_t feature_count, std::size_t alternative_count, std::vector<double> entries)
      : rows_(feature_count), cols_(alternative_count), entries_(std::move(entries)) {
    if (rows_ == 0 || cols_ == 0)
      raise(errc::invalid_weights, "weight matrix must have at least one row and one column");
    if (entries_.size() != rows_ * cols_)
      raise(errc::invalid_weights, "entry count does not match the matrix shape");
    for (double& x : entries_) {
      if (std::isnan(x) || x < -kInputSimplexTol)
        raise(errc::invalid_weights, "weights must be non-negative");
      if (x < 0.0) x = 0.0;
    }
    for (std::size_t j = 0; j < cols_; ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < rows_; ++i) sum += (*this)(i, j);
      if (std::abs(sum - 1.0) > kInputSimplexTol)
        raise(errc::invalid_weights, "column " + std::to_string(j) + " does not sum to 1");
    }
  }

  static WeightMatrix uniform(std::size_t feature_count, std::size_t alternative_count) {
    std::vector<double> e(feature_count * alternative_count, 1.0 / static_cast<double>(feature_count));
    return WeightMatrix(feature_count, alternative_count, std::move(e));
  }

  /// Every column equal to `column` (the standard composite-likelihood case).
  static WeightMatrix constant_columns(std::span<const double> column, std::size_t alternative_count) {
    std::vector<double> e(column.size() * alternative_count);
    for (std::size_t i = 0; i < column.size(); ++i)
      for (std::size_t j = 0; j < alternative_count; ++j) e[i * alternative_count + j] = column[i];
    return WeightMatrix(column.size(), alternative_count, std::move(e));
  }

  static WeightMatrix from_columns(const std::vector<std::vector<double>>& columns) {
    if (columns.empty()) raise(errc::invalid_weights, "no columns");
    std::size_t n = columns.front().size();
    std::vector<double> e(n * columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j].size() != n) raise(errc::invalid_weights, "ragged columns");
      for (std::size_t i = 0; i < n; ++i) e[i * columns.size() + j] = columns[j][i];
    }
    return WeightMatrix(n, columns.size(), std::move(e));
  }

  std::size_t feature_count() const { return rows_; }
  std::size_t alternative_count() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_.at(i * cols_ + j); }

  std::vector<double> column(std::size_t j) const {
    if (j >= cols_) raise(errc::index_out_of_range, "weight column out of range");
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  const std::vector<double>& entries() const { return entries_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> entries_;
};

/// Per-clue sampling tables p(z_i | theta [, psi] [, z_i^c]).
///
/// The table is stored flat over (theta, psi, conditioner) with psi and the
/// conditioner collapsing to a single slot when the model is unparametric or
/// unconditional.
class FeatureModel {
 public:
  FeatureModel(std::size_t index, std::string name, std::size_t hypothesis_count,
               std::vector<std::string> alphabet,
               std::optional<std::vector<std::string>> conditioning_alphabet,
               std::optional<std::vector<std::string>> nuisance_grid,
               std::vector<FiniteDistribution> table)
      : index_(index),
        name_(std::move(name)),
        hypothesis_count_(hypothesis_count),
        alphabet_(std::move(alphabet)),
        conditioning_alphabet_(std::move(conditioning_alphabet)),
        nuisance_grid_(std::move(nuisance_grid)),
        table_(std::move(table)) {
    if (hypothesis_count_ < 2)
      raise(errc::invalid_hypothesis_space, "feature model needs at least two hypotheses");
    check_labels(alphabet_, "feature alphabet");
    if (conditioning_alphabet_) check_labels(*conditioning_alphabet_, "conditioning alphabet");
    if (nuisance_grid_) check_labels(*nuisance_grid_, "nuisance grid");
    if (table_.size() != hypothesis_count_ * psi_slots() * conditioner_slots())
      raise(errc::dimension_mismatch,
            "feature '" + name_ + "': table has " + std::to_string(table_.size()) +
                " entries, expected " +
                std::to_string(hypothesis_count_ * psi_slots() * conditioner_slots()));
    for (const auto& d : table_)
      if (d.alphabet() != alphabet_)
        raise(errc::alphabet_mismatch, "feature '" + name_ + "': table row alphabet mismatch");
  }

  std::size_t index() const { return index_; }
  const std::string& name() const { return name_; }
  std::size_t hypothesis_count() const { return hypothesis_count_; }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  bool conditional() const { return conditioning_alphabet_.has_value(); }
  bool parametric() const { return nuisance_grid_.has_value(); }
  const std::optional<std::vector<std::string>>& conditioning_alphabet() const {
    return conditioning_alphabet_;
  }
  const std::optional<std::vector<std::string>>& nuisance_grid() const { return nuisance_grid_; }

  const FiniteDistribution& distribution(std::size_t theta,
                                         std::optional<std::size_t> psi = std::nullopt,
                                         std::optional<std::size_t> conditioner = std::nullopt) const {
    if (theta >= hypothesis_count_) raise(errc::index_out_of_range, "hypothesis index out of range");
    std::size_t p = 0;
    if (parametric()) {
      if (!psi) raise(errc::missing_nuisance, "feature '" + name_ + "' requires a nuisance index");
      if (*psi >= nuisance_grid_->size())
        raise(errc::index_out_of_range, "nuisance index out of range");
      p = *psi;
    }
    std::size_t c = 0;
    if (conditional()) {
      if (!conditioner)
        raise(errc::missing_conditioner, "feature '" + name_ + "' requires a conditioning symbol");
      if (*conditioner >= conditioning_alphabet_->size())
        raise(errc::index_out_of_range, "conditioner index out of range");
      c = *conditioner;
    }
    return table_[(theta * psi_slots() + p) * conditioner_slots() + c];
  }

  double log_prob(std::size_t theta, std::size_t symbol,
                  std::optional<std::size_t> psi = std::nullopt,
                  std::optional<std::size_t> conditioner = std::nullopt) const {
    return distribution(theta, psi, conditioner).log_prob(symbol);
  }

 private:
  std::size_t psi_slots() const { return nuisance_grid_ ? nuisance_grid_->size() : 1; }
  std::size_t conditioner_slots() const {
    return conditioning_alphabet_ ? conditioning_alphabet_->size() : 1;
  }

  static void check_labels(const std::vector<std::string>& labels, const char* what) {
    if (labels.empty()) raise(errc::invalid_distribution, std::string(what) + " is empty");
    for (std::size_t a = 0; a < labels.size(); ++a)
      for (std::size_t b = a + 1; b < labels.size(); ++b)
        if (labels[a] == labels[b])
          raise(errc::invalid_distribution, std::string(what) + " has duplicate symbols");
  }

  std::size_t index_;
  std::string name_;
  std::size_t hypothesis_count_;
  std::vector<std::string> alphabet_;
  std::optional<std::vector<std::string>> conditioning_alphabet_;
  std::optional<std::vector<std::string>> nuisance_grid_;
  std::vector<FiniteDistribution> table_;
};

}  // namespace sclkit
