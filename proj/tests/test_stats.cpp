#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tpplab/rng.hpp"
#include "tpplab/stats.hpp"

using namespace tpp;

TEST_CASE("quantile interpolates linearly between order statistics") {
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(i);
  CHECK(stats::quantile(grid, 0.90) == doctest::Approx(90.1));
  CHECK(stats::quantile(grid, 0.95) == doctest::Approx(95.05));
  CHECK(stats::quantile(grid, 0.99) == doctest::Approx(99.01));
  CHECK(stats::quantile(grid, 0.0) == 1.0);
  CHECK(stats::quantile(grid, 1.0) == 100.0);
  CHECK(stats::median({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
  CHECK(stats::median({4.0, 1.0, 2.0, 3.0}) == doctest::Approx(2.5));
}

TEST_CASE("logsumexp is shift-stable") {
  std::vector<double> x = {-1000.0, -1000.0};
  CHECK(stats::logsumexp(x) == doctest::Approx(-1000.0 + std::log(2.0)));
  std::vector<double> y = {700.0, 710.0};
  CHECK(stats::logsumexp(y) == doctest::Approx(710.0 + std::log1p(std::exp(-10.0))));
}

TEST_CASE("normal and chi-square reference values") {
  CHECK(stats::normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
  CHECK(stats::normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-5));
  CHECK(stats::chisq_sf(3.841459, 1.0) == doctest::Approx(0.05).epsilon(1e-4));
  // Gamma(1, rate) is Exp(rate).
  CHECK(stats::gamma_cdf(2.0, 1.0, 0.5) == doctest::Approx(1.0 - std::exp(-1.0)));
  CHECK(stats::kolmogorov_sf(1.358) == doctest::Approx(0.05).epsilon(2e-2));
}

TEST_CASE("KS test accepts matching and rejects mismatched samples") {
  rng::Stream stream(42);
  std::vector<double> draws;
  for (int i = 0; i < 4000; ++i) draws.push_back(stream.exponential());
  auto exp_cdf = [](double x) { return 1.0 - std::exp(-x); };
  const auto ok = stats::ks_test(draws, exp_cdf);
  CHECK(ok.p_value > 0.01);
  // Same draws against a half-rate exponential must reject hard.
  const auto bad = stats::ks_test(draws, [](double x) { return 1.0 - std::exp(-0.5 * x); });
  CHECK(bad.p_value < 1e-6);
}

TEST_CASE("chi-square count test matches Poisson simulation") {
  rng::Stream stream(7);
  const double lambda = 9.0;
  std::vector<long> counts;
  for (int i = 0; i < 5000; ++i) counts.push_back(oracle::poisson_draw(stream, lambda));
  const auto res =
      stats::chisq_counts_test(counts, [&](long k) { return oracle::poisson_pmf(k, lambda); });
  CHECK(res.p_value > 0.01);
  const auto wrong = stats::chisq_counts_test(
      counts, [&](long k) { return oracle::poisson_pmf(k, lambda * 1.3); });
  CHECK(wrong.p_value < 1e-6);
}

TEST_CASE("rank AUC handles separation, ties, and degenerate labels") {
  std::vector<double> scores = {0.1, 0.2, 0.8, 0.9};
  std::vector<int> labels = {0, 0, 1, 1};
  CHECK(stats::rank_auc(scores, labels) == doctest::Approx(1.0));
  std::vector<int> flipped = {1, 1, 0, 0};
  CHECK(stats::rank_auc(scores, flipped) == doctest::Approx(0.0));
  std::vector<double> tied = {0.5, 0.5, 0.5, 0.5};
  CHECK(stats::rank_auc(tied, labels) == doctest::Approx(0.5));
  std::vector<int> one_class = {1, 1, 1, 1};
  CHECK(std::isnan(stats::rank_auc(scores, one_class)));
}

TEST_CASE("AUC is invariant under strictly monotone score transforms") {
  rng::Stream stream(11);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 500; ++i) {
    const double s = stream.uniform();
    scores.push_back(s);
    labels.push_back(stream.uniform() < s ? 1 : 0);
  }
  const double base = stats::rank_auc(scores, labels);
  std::vector<double> warped = scores;
  for (double& s : warped) s = std::exp(5.0 * s);
  CHECK(stats::rank_auc(warped, labels) == doctest::Approx(base));
}
