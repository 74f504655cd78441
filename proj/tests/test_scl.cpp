#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sclkit/scl.hpp"
#include "test_support.hpp"

using namespace sclkit;
using namespace testsupport;

TEST_CASE("scl_log is zero at the reference and a weighted log-ratio elsewhere") {
  std::vector<FeatureModel> models = {table_model(0, 3, {{0.2, 0.8}, {0.6, 0.4}, {0.5, 0.5}}),
                                      table_model(1, 3, {{0.5, 0.5}, {0.1, 0.9}, {0.5, 0.5}})};
  auto obs = obs_of(models, {0, 0});
  auto w = WeightMatrix::uniform(2, 2);
  CHECK(scl_log(models, 0, obs, w) == 0.0);
  double expect = 0.5 * (std::log(0.6) - std::log(0.2)) + 0.5 * (std::log(0.1) - std::log(0.5));
  CHECK(scl_log(models, 1, obs, w) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("scl_log with equal columns is a composite likelihood ratio") {
  std::mt19937_64 rng(3);
  for (int it = 0; it < 50; ++it) {
    std::size_t h = 2 + rng() % 4, n = 1 + rng() % 4;
    auto models = random_models(rng, n, h);
    auto obs = random_obs(rng, models);
    auto col = random_simplex(rng, n);
    auto w = WeightMatrix::constant_columns(col, h - 1);
    for (std::size_t j = 1; j < h; ++j) {
      double direct = composite_log_likelihood(models, j, obs, col) -
                      composite_log_likelihood(models, 0, obs, col);
      CHECK(scl_log(models, j, obs, w) == doctest::Approx(direct).epsilon(1e-13));
    }
  }
}

TEST_CASE("scl_log with a one-hot column reduces to a single clue ratio") {
  std::vector<FeatureModel> models = {table_model(0, 2, {{0.2, 0.8}, {0.6, 0.4}}),
                                      table_model(1, 2, {{0.5, 0.5}, {0.1, 0.9}})};
  auto obs = obs_of(models, {0, 0});
  auto w = pdf_projection_matrix(std::vector<std::size_t>{1}, 2);
  CHECK(scl_log(models, 1, obs, w) ==
        doctest::Approx(std::log(0.1) - std::log(0.5)).epsilon(1e-14));
}

TEST_CASE("scl_log infinities") {
  SUBCASE("zero reference likelihood with positive alternative gives +inf") {
    std::vector<FeatureModel> models = {table_model(0, 2, {{0.0, 1.0}, {0.6, 0.4}})};
    auto obs = obs_of(models, {0});
    CHECK(scl_log(models, 1, obs, WeightMatrix::uniform(1, 1)) == kInfinity);
  }
  SUBCASE("0/0 under positive weight is a broken model") {
    std::vector<FeatureModel> models = {table_model(0, 2, {{0.0, 1.0}, {0.0, 1.0}})};
    auto obs = obs_of(models, {0});
    CHECK_THROWS_WITH_AS(scl_log(models, 1, obs, WeightMatrix::uniform(1, 1)),
                         doctest::Contains("IndeterminateRatio"), error);
  }
  SUBCASE("zero weight mutes even an impossible clue") {
    std::vector<FeatureModel> models = {table_model(0, 2, {{0.2, 0.8}, {0.6, 0.4}}),
                                        table_model(1, 2, {{0.0, 1.0}, {0.0, 1.0}})};
    auto obs = obs_of(models, {0, 0});
    auto w = WeightMatrix::constant_columns(std::vector<double>{1.0, 0.0}, 1);
    CHECK(scl_log(models, 1, obs, w) ==
          doctest::Approx(std::log(0.6) - std::log(0.2)).epsilon(1e-14));
  }
}

TEST_CASE("scl posterior on a three-hypothesis one-clue-per-hypothesis problem") {
  // clue 1 carries ratio 3 for h1, clue 2 carries ratio 1 for h2
  std::vector<FeatureModel> models = {table_model(0, 3, {{0.2, 0.8}, {0.6, 0.4}, {0.3, 0.7}}),
                                      table_model(1, 3, {{0.5, 0.5}, {0.4, 0.6}, {0.5, 0.5}})};
  auto obs = obs_of(models, {0, 0});
  auto w = pdf_projection_matrix(std::vector<std::size_t>{0, 1}, 2);
  auto prior = FiniteDistribution::uniform(hypothesis_labels(3));
  auto post = scl_posterior(prior, models, obs, w);
  CHECK(post.prob(0) == doctest::Approx(0.2).epsilon(1e-13));
  CHECK(post.prob(1) == doctest::Approx(0.6).epsilon(1e-13));
  CHECK(post.prob(2) == doctest::Approx(0.2).epsilon(1e-13));
}

TEST_CASE("scl posterior with m=1 is two-hypothesis Bayes over the composite likelihood") {
  std::mt19937_64 rng(17);
  for (int it = 0; it < 50; ++it) {
    std::size_t n = 1 + rng() % 4;
    auto models = random_models(rng, n, 2);
    auto obs = random_obs(rng, models);
    auto col = random_simplex(rng, n);
    auto w = WeightMatrix::constant_columns(col, 1);
    auto prior = FiniteDistribution::from_probs(hypothesis_labels(2), random_simplex(rng, 2));
    auto post = scl_posterior(prior, models, obs, w);
    std::vector<double> direct = {prior.log_prob(0) + composite_log_likelihood(models, 0, obs, col),
                                  prior.log_prob(1) + composite_log_likelihood(models, 1, obs, col)};
    auto bayes = normalize_log(hypothesis_labels(2), direct);
    CHECK(max_norm_distance(post, bayes) < 1e-14);
  }
}

TEST_CASE("scl_log validates the weight matrix shape") {
  std::vector<FeatureModel> models = {table_model(0, 3, {{0.2, 0.8}, {0.6, 0.4}, {0.5, 0.5}}),
                                      table_model(1, 3, {{0.5, 0.5}, {0.1, 0.9}, {0.5, 0.5}})};
  auto obs = obs_of(models, {0, 0});
  CHECK_THROWS_WITH_AS(scl_log(models, 1, obs, WeightMatrix::uniform(3, 2)),
                       doctest::Contains("WeightDimensionMismatch"), error);
  CHECK_THROWS_WITH_AS(scl_log(models, 1, obs, WeightMatrix::uniform(2, 3)),
                       doctest::Contains("DimensionMismatch"), error);
  CHECK_THROWS_WITH_AS(scl_log(models, 9, obs, WeightMatrix::uniform(2, 2)),
                       doctest::Contains("IndexOutOfRange"), error);
}

TEST_CASE("scl posterior requires positive reference prior mass") {
  std::vector<FeatureModel> models = {table_model(0, 2, {{0.2, 0.8}, {0.6, 0.4}})};
  auto obs = obs_of(models, {0});
  auto prior = FiniteDistribution({"h0", "h1"}, {-kInfinity, 0.0});
  CHECK_THROWS_WITH_AS(scl_posterior(prior, models, obs, WeightMatrix::uniform(1, 1)),
                       doctest::Contains("ReferencePriorZero"), error);
}

TEST_CASE("infinite ratios collapse the posterior onto the dominating set") {
  std::vector<FeatureModel> models = {table_model(0, 3, {{0.0, 1.0}, {0.6, 0.4}, {0.3, 0.7}})};
  auto obs = obs_of(models, {0});
  auto prior = FiniteDistribution::uniform(hypothesis_labels(3));
  auto post = scl_posterior(prior, models, obs, WeightMatrix::uniform(1, 2));
  CHECK(post.prob(0) == 0.0);
  CHECK(post.prob(1) == doctest::Approx(0.5));
  CHECK(post.prob(2) == doctest::Approx(0.5));
}

TEST_CASE("constant-column SCL equals the log-linear pool, whatever the reference") {
  std::mt19937_64 rng(29);
  for (int it = 0; it < 200; ++it) {
    std::size_t h = 2 + rng() % 4, n = 1 + rng() % 4;
    // raw tables so we can re-reference freely: rows[i][theta] = distribution
    std::vector<std::vector<std::vector<double>>> rows(n);
    std::vector<std::size_t> arity(n);
    for (std::size_t i = 0; i < n; ++i) {
      arity[i] = 2 + rng() % 3;
      rows[i].resize(h);
      for (auto& r : rows[i]) r = random_simplex(rng, arity[i]);
    }
    auto col = random_simplex(rng, n);
    auto prior_probs = random_simplex(rng, h);
    std::vector<std::size_t> obs_idx(n);
    for (std::size_t i = 0; i < n; ++i) obs_idx[i] = rng() % arity[i];

    // the pool in the original ordering (reference-free)
    std::vector<FeatureModel> base_models;
    for (std::size_t i = 0; i < n; ++i) base_models.push_back(table_model(i, h, rows[i]));
    auto base_obs = obs_of(base_models, obs_idx);
    auto base_prior = FiniteDistribution::from_probs(hypothesis_labels(h), prior_probs);
    auto pool = log_linear_pool(base_prior, base_models, base_obs, col);

    // rotate every hypothesis into the reference slot and compare
    for (std::size_t ref = 0; ref < h; ++ref) {
      auto rot = [&](std::size_t t) { return (ref + t) % h; };
      std::vector<FeatureModel> models;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::vector<double>> permuted(h);
        for (std::size_t t = 0; t < h; ++t) permuted[t] = rows[i][rot(t)];
        models.push_back(table_model(i, h, permuted));
      }
      std::vector<double> pp(h);
      std::vector<std::string> labels(h);
      for (std::size_t t = 0; t < h; ++t) {
        pp[t] = prior_probs[rot(t)];
        labels[t] = "h" + std::to_string(rot(t));
      }
      auto prior = FiniteDistribution::from_probs(labels, pp);
      auto obs = obs_of(models, obs_idx);
      auto post = scl_posterior(prior, models, obs, WeightMatrix::constant_columns(col, h - 1));
      for (std::size_t t = 0; t < h; ++t)
        CHECK(std::abs(post.prob(t) - pool.prob(rot(t))) < 1e-12);
    }
  }
}

TEST_CASE("folding the prior into each bracketed ratio changes nothing") {
  std::mt19937_64 rng(31);
  for (int it = 0; it < 200; ++it) {
    std::size_t h = 2 + rng() % 4, n = 1 + rng() % 4;
    auto models = random_models(rng, n, h);
    auto obs = random_obs(rng, models);
    auto w = random_weight_matrix(rng, n, h - 1);
    auto prior = FiniteDistribution::from_probs(hypothesis_labels(h), random_simplex(rng, h));

    auto direct = scl_posterior(prior, models, obs, w);

    // prior folded inside each ratio, using that every column sums to one
    std::vector<double> scores(h, 0.0);
    for (std::size_t j = 1; j < h; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double la = prior.log_prob(j) + feature_log_likelihood(models[i], j, obs);
        double lb = prior.log_prob(0) + feature_log_likelihood(models[i], 0, obs);
        acc += w(i, j - 1) * (la - lb);
      }
      scores[j] = acc;
    }
    auto folded = normalize_log(hypothesis_labels(h), scores);
    CHECK(max_norm_distance(direct, folded) < 1e-12);
  }
}

TEST_CASE("bipartite factor product over the truncation variables factorizes") {
  std::mt19937_64 rng(41);
  for (int it = 0; it < 200; ++it) {
    std::size_t m = 1 + rng() % 3;  // up to 3 truncation variables
    std::size_t h = m + 1;
    std::size_t n = 1 + rng() % 3;
    std::vector<std::size_t> arity(n);
    std::vector<std::vector<std::vector<double>>> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
      arity[i] = 2 + rng() % 2;  // alphabets up to 3
      rows[i].resize(h);
      for (auto& r : rows[i]) r = random_simplex(rng, arity[i]);
    }
    auto w = random_weight_matrix(rng, n, m);

    // every joint clue configuration z
    std::vector<std::size_t> z(n, 0);
    bool done = false;
    while (!done) {
      std::size_t states = std::size_t{1} << m;
      std::vector<double> joint(states, 1.0);
      for (std::size_t t = 0; t < states; ++t)
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t i = 0; i < n; ++i) {
            bool on = (t >> j) & 1u;
            double ell = rows[i][on ? j + 1 : 0][z[i]];
            joint[t] *= std::pow(ell, w(i, j));
          }
      double total = 0.0;
      for (double q : joint) total += q;
      for (double& q : joint) q /= total;

      // per-variable marginals
      std::vector<double> p_on(m, 0.0);
      for (std::size_t t = 0; t < states; ++t)
        for (std::size_t j = 0; j < m; ++j)
          if ((t >> j) & 1u) p_on[j] += joint[t];

      for (std::size_t t = 0; t < states; ++t) {
        double prod = 1.0;
        for (std::size_t j = 0; j < m; ++j) prod *= ((t >> j) & 1u) ? p_on[j] : 1.0 - p_on[j];
        CHECK(std::abs(joint[t] - prod) < 1e-12);
      }

      done = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (++z[i] < arity[i]) {
          done = false;
          break;
        }
        z[i] = 0;
      }
    }
  }
}

TEST_CASE("pdf projection matrices") {
  auto w = pdf_projection_matrix(std::vector<std::size_t>{0, 1}, 2);
  CHECK(w(0, 0) == 1.0);
  CHECK(w(1, 0) == 0.0);
  CHECK(w(1, 1) == 1.0);

  auto all_first = pdf_projection_matrix(std::vector<std::size_t>{0, 0, 0}, 1);
  for (std::size_t j = 0; j < 3; ++j) CHECK(all_first(0, j) == 1.0);

  auto single = pdf_projection_matrix(std::vector<std::size_t>{2}, 5);
  CHECK(single(2, 0) == 1.0);
  CHECK(single(0, 0) == 0.0);

  CHECK_THROWS_WITH_AS(pdf_projection_matrix(std::vector<std::size_t>{7}, 2),
                       doctest::Contains("IndexOutOfRange"), error);
}

TEST_CASE("population-code posterior equals the direct Bayes posterior") {
  std::mt19937_64 rng(53);
  RandomOracleConfig cfg;
  cfg.min_y = 8;
  cfg.max_y = 8;
  for (int it = 0; it < 200; ++it) {
    auto oracle = random_oracle(rng, cfg);
    std::size_t y = rng() % oracle.y_alphabet().size();
    auto pop = population_code_posterior(oracle, y, oracle.prior_theta());
    auto direct = true_posterior(oracle, y);
    CHECK(max_norm_distance(pop, direct) < 1e-12);
  }
}

TEST_CASE("population-code posterior under a uniform reference row") {
  // p(y|theta_0) uniform: the message product is proportional to p(y|theta)
  auto labels = hypothesis_labels(3);
  std::vector<std::string> ys = {"y0", "y1", "y2", "y3"};
  std::vector<FiniteDistribution> lik = {
      FiniteDistribution::uniform(ys),
      FiniteDistribution::from_probs(ys, std::vector<double>{0.4, 0.3, 0.2, 0.1}),
      FiniteDistribution::from_probs(ys, std::vector<double>{0.1, 0.1, 0.2, 0.6})};
  FeatureMapDef id{"z1", ys, {0, 1, 2, 3}};
  auto oracle = GenerativeOracle(HypothesisSpace(labels), ys, lik, {id}, {},
                                 FiniteDistribution::uniform(labels));
  auto post = population_code_posterior(oracle, std::size_t{3}, oracle.prior_theta());
  auto expect = normalize_log(labels, std::vector<double>{std::log(0.25), std::log(0.1),
                                                          std::log(0.6)});
  CHECK(max_norm_distance(post, expect) < 1e-14);
  CHECK(max_norm_distance(post, true_posterior(oracle, std::size_t{3})) < 1e-14);
}

TEST_CASE("population-code posterior rejects a zero reference likelihood") {
  auto labels = hypothesis_labels(2);
  std::vector<std::string> ys = {"y0", "y1"};
  std::vector<FiniteDistribution> lik = {
      FiniteDistribution::from_probs(ys, std::vector<double>{0.0, 1.0}),
      FiniteDistribution::from_probs(ys, std::vector<double>{0.5, 0.5})};
  FeatureMapDef id{"z1", ys, {0, 1}};
  auto oracle = GenerativeOracle(HypothesisSpace(labels), ys, lik, {id}, {},
                                 FiniteDistribution::uniform(labels));
  CHECK_THROWS_WITH_AS(population_code_posterior(oracle, std::size_t{0}, oracle.prior_theta()),
                       doctest::Contains("ReferenceLikelihoodZero"), error);
}
