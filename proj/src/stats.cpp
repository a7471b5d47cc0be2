#include "tpplab/stats.hpp"

#include <gsl/gsl_cdf.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tpp::stats {

double mean(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double sd(std::span<const double> x) { return std::sqrt(variance(x)); }

double quantile_sorted(std::span<const double> x, double p) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (p <= 0.0) return x.front();
  if (p >= 1.0) return x.back();
  const double h = p * static_cast<double>(x.size() - 1);
  const auto i = static_cast<std::size_t>(h);
  if (i + 1 >= x.size()) return x.back();
  const double frac = h - static_cast<double>(i);
  return x[i] + frac * (x[i + 1] - x[i]);
}

double quantile(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, p);
}

double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

double logsumexp(std::span<const double> x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

double normal_cdf(double x) { return gsl_cdf_ugaussian_P(x); }

double normal_quantile(double p) { return gsl_cdf_ugaussian_Pinv(p); }

double gamma_cdf(double x, double shape, double rate) {
  if (x <= 0.0) return 0.0;
  return gsl_cdf_gamma_P(x, shape, 1.0 / rate);
}

double chisq_sf(double x, double df) { return gsl_cdf_chisq_Q(x, df); }

double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_test: empty sample");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  const double sqn = std::sqrt(n);
  const double p = kolmogorov_sf((sqn + 0.12 + 0.11 / sqn) * d);
  return {d, p, samples.size()};
}

ChiSquareResult chisq_counts_test(std::span<const long> counts,
                                  const std::function<double(long)>& pmf,
                                  double min_expected) {
  if (counts.empty()) throw std::invalid_argument("chisq_counts_test: empty sample");
  long max_count = 0;
  for (long c : counts) max_count = std::max(max_count, c);
  const auto n = static_cast<double>(counts.size());

  std::vector<double> observed(static_cast<std::size_t>(max_count) + 1, 0.0);
  for (long c : counts) observed[static_cast<std::size_t>(c)] += 1.0;
  std::vector<double> expected(observed.size());
  double tail = 1.0;
  for (std::size_t k = 0; k < expected.size(); ++k) {
    const double pk = pmf(static_cast<long>(k));
    expected[k] = n * pk;
    tail -= pk;
  }
  // Everything above max_count lands in the final pooled bin.
  expected.back() += n * std::max(tail, 0.0);

  std::vector<double> obs_bins, exp_bins;
  double o_acc = 0.0, e_acc = 0.0;
  for (std::size_t k = 0; k < expected.size(); ++k) {
    o_acc += observed[k];
    e_acc += expected[k];
    if (e_acc >= min_expected) {
      obs_bins.push_back(o_acc);
      exp_bins.push_back(e_acc);
      o_acc = e_acc = 0.0;
    }
  }
  if (e_acc > 0.0 || o_acc > 0.0) {
    if (exp_bins.empty()) {
      obs_bins.push_back(o_acc);
      exp_bins.push_back(e_acc);
    } else {
      obs_bins.back() += o_acc;
      exp_bins.back() += e_acc;
    }
  }

  double stat = 0.0;
  for (std::size_t b = 0; b < exp_bins.size(); ++b) {
    const double diff = obs_bins[b] - exp_bins[b];
    stat += diff * diff / exp_bins[b];
  }
  const double df = static_cast<double>(exp_bins.size()) - 1.0;
  const double p = df > 0 ? chisq_sf(stat, df) : 1.0;
  return {stat, p, exp_bins.size()};
}

double rank_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("rank_auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) rank_sum_pos += midrank;
    }
    i = j;
  }
  for (int l : labels) {
    if (l != 0)
      ++n_pos;
    else
      ++n_neg;
  }
  if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace tpp::stats
