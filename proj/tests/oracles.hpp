#ifndef TPPLAB_TESTS_ORACLES_HPP
#define TPPLAB_TESTS_ORACLES_HPP

// Independent reference implementations used only by tests. These stay
// deliberately naive (direct sums, brute-force enumeration) so they cannot
// share a bug with the library's optimized paths.

#include <cmath>
#include <vector>

#include "tpplab/events.hpp"
#include "tpplab/models.hpp"
#include "tpplab/rng.hpp"

namespace oracle {

// Central finite differences of the raw log-likelihood, per-parameter scaled
// step.
inline std::vector<double> fd_gradient(tpp::ModelFamily f, std::vector<double> p,
                                       const tpp::EventSequence& seq, double step = 1e-5) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double h = step * std::max(1.0, std::fabs(p[i]));
    const double orig = p[i];
    p[i] = orig + h;
    const double up = tpp::raw::loglik(f, p, seq, {});
    p[i] = orig - h;
    const double down = tpp::raw::loglik(f, p, seq, {});
    p[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Direct-sum log-likelihood: per-event intensity via the naive history scan
// and the closed-form compensator, no Markov recursion.
inline double naive_loglik(tpp::ModelFamily f, std::span<const double> p,
                           const tpp::EventSequence& seq) {
  double ll = 0.0;
  for (double t : seq.onsets())
    ll += std::log(tpp::raw::intensity(f, p, seq.history_before(t), t));
  ll -= tpp::raw::cumulative(f, p, seq.onsets(), seq.duration());
  return ll;
}

inline tpp::EventSequence random_sequence(tpp::rng::Stream& stream, double T,
                                          std::size_t max_events = 30,
                                          const std::string& id = "rand") {
  const std::size_t j = 1 + stream.uniform_index(max_events);
  std::vector<double> onsets(j);
  for (auto& t : onsets) t = stream.uniform() * T;
  std::sort(onsets.begin(), onsets.end());
  onsets.erase(std::unique(onsets.begin(), onsets.end()), onsets.end());
  return tpp::EventSequence(id, std::move(onsets), T);
}

inline double poisson_pmf(long k, double lambda) {
  if (k < 0) return 0.0;
  return std::exp(static_cast<double>(k) * std::log(lambda) - lambda -
                  std::lgamma(static_cast<double>(k) + 1.0));
}

inline long poisson_median(double lambda) {
  double cdf = 0.0;
  for (long k = 0;; ++k) {
    cdf += poisson_pmf(k, lambda);
    if (cdf >= 0.5) return k;
    if (k > 1000000) return k;
  }
}

inline long poisson_draw(tpp::rng::Stream& stream, double lambda) {
  // Inversion; fine for the moderate rates used in tests.
  const double u = stream.uniform();
  double cdf = 0.0;
  for (long k = 0;; ++k) {
    cdf += poisson_pmf(k, lambda);
    if (u <= cdf || k > 10000000) return k;
  }
}

// Exact leave-one-out log predictive for the conjugate HPP/Gamma pair:
// p(S_i, T_i | rest) with Gamma(a + J_-i, b + T_-i) posterior on the rest.
inline double exact_loo_hpp(const tpp::Dataset& ds, double a, double b) {
  double total_j = 0.0, total_t = 0.0;
  for (const auto& seq : ds.sequences) {
    total_j += static_cast<double>(seq.count());
    total_t += seq.duration();
  }
  double elpd = 0.0;
  for (const auto& seq : ds.sequences) {
    const double aa = a + total_j - static_cast<double>(seq.count());
    const double bb = b + total_t - seq.duration();
    elpd += aa * std::log(bb) - std::lgamma(aa) + std::lgamma(aa + seq.count()) -
            (aa + static_cast<double>(seq.count())) * std::log(bb + seq.duration());
  }
  return elpd;
}

}  // namespace oracle

#endif
