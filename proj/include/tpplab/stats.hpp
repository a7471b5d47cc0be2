#ifndef TPPLAB_STATS_HPP
#define TPPLAB_STATS_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace tpp::stats {

double mean(std::span<const double> x);
double variance(std::span<const double> x);  // sample (n-1)
double sd(std::span<const double> x);

// Linear interpolation between order statistics (inverse-CDF with the
// (n-1)*p plotting position); x must be sorted ascending, p in [0,1].
double quantile_sorted(std::span<const double> x, double p);
double quantile(std::vector<double> x, double p);
double median(std::vector<double> x);

double logsumexp(std::span<const double> x);

double normal_cdf(double x);
double normal_quantile(double p);
double gamma_cdf(double x, double shape, double rate);
double chisq_sf(double x, double df);

// Kolmogorov distribution survival function Q(x) = P(K > x).
double kolmogorov_sf(double x);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// One-sample KS against a continuous CDF.
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t bins = 0;
};

// Goodness of fit of integer counts against given pmf/cdf bin probabilities.
// Tail bins are pooled until every expected count is >= min_expected.
ChiSquareResult chisq_counts_test(std::span<const long> counts,
                                  const std::function<double(long)>& pmf,
                                  double min_expected = 5.0);

// Mann-Whitney AUC with midranks for ties. Returns NaN when a class is empty.
double rank_auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace tpp::stats

#endif
