#ifndef TPPLAB_DIAGNOSE_HPP
#define TPPLAB_DIAGNOSE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tpplab/models.hpp"
#include "tpplab/simulate.hpp"

namespace tpp {

// Random-time-change map: tau(t_j) = Lambda*(t_j) with the left-limit history.
// Under the generating model the inter-onsets of tau are IID Exp(1).
std::vector<double> rtc_transform(const ParamSet& params, const EventSequence& seq);

// Transformed inter-onsets; the first gap is measured from tau = 0. The
// censored interval after the last onset is excluded from the pool.
std::vector<double> rtc_interonsets(const ParamSet& params, const EventSequence& seq);

struct QQData {
  std::vector<double> empirical;    // sorted transformed inter-onsets
  std::vector<double> theoretical;  // Exp(1) quantiles at (i - 0.5)/n
};

QQData qq_points(std::vector<double> pooled_interonsets);

struct RawResidual {
  std::size_t n_events = 0;  // N(T)
  double residual = 0.0;     // M(T) = N(T) - Lambda*(T)
};

RawResidual raw_residual(const ParamSet& params, const EventSequence& seq);

// Order-statistic W1 distance between two empirical count samples.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);
double wasserstein_1d_counts(std::span<const long> a, std::span<const long> b);

struct KdeCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

// Gaussian KDE with Silverman bandwidth floored at bandwidth_floor (counts
// are integers; the floor prevents spikes on near-constant samples).
KdeCurve kde_curve(std::span<const double> samples, std::vector<double> grid,
                   double bandwidth_floor = 0.5);

// Ripley K with the reflection edge weights (w = 1 when the pair distance
// fits inside min(t_i, T - t_i), else 2); the homogeneous reference is 2t.
std::vector<double> ripley_k(const EventSequence& seq, std::span<const double> lags);

struct AuditRow {
  std::string source;
  std::size_t n_sessions = 0;
  // mean +- sd across qualifying sessions
  double q90_mean = 0, q90_sd = 0;
  double q95_mean = 0, q95_sd = 0;
  double q99_mean = 0, q99_sd = 0;
  double max_mean = 0, max_sd = 0;
  double n_mean = 0, n_sd = 0;
  double r9590_mean = 0, r9590_sd = 0;
  double r9995_mean = 0, r9995_sd = 0;
  double rmax99_mean = 0, rmax99_sd = 0;
  double outlier_mean = 0, outlier_sd = 0;
};

// Inter-onset quantile-ratio audit over sessions with >= min_events events;
// outliers are inter-onsets exceeding 2x the 99% quantile.
AuditRow quantile_outlier_audit(const std::vector<EventSequence>& sequences,
                                const std::string& source, std::size_t min_events = 5);

struct RipleyCurve {
  std::string session_id;
  std::vector<double> k_hat;
};

struct DiagnosticConfig {
  std::uint64_t seed = 0;
  std::size_t trials = 40;
  std::size_t ripley_min_onsets = 15;
  std::vector<double> ripley_lags;  // defaults to 1..20 minutes
  SimConfig sim;
};

struct DiagnosticReport {
  std::string posterior_ref;  // archive the parameters came from, if any
  std::uint64_t seed = 0;
  QQData qq;
  std::vector<std::string> residual_sessions;
  std::vector<RawResidual> residuals;
  std::vector<long> empirical_counts;
  std::vector<std::vector<long>> model_count_trials;
  double wd_mean = 0.0;
  double wd_sd = 0.0;
  KdeCurve kde_model;
  KdeCurve kde_empirical;
  std::vector<double> ripley_lags;
  std::vector<RipleyCurve> ripley;
  std::vector<AuditRow> audit;
};

// Full goodness-of-fit suite against one parameter point (typically the
// posterior mean) plus posterior-draw count simulation.
DiagnosticReport run_diagnostics(const Dataset& ds, const ParamSet& point,
                                 const std::vector<ParamSet>& draws,
                                 const DiagnosticConfig& cfg);

// Variant where the RTC transform and residual compensator are averaged over
// a subset of posterior draws instead of a single point.
DiagnosticReport run_diagnostics_draw_averaged(const Dataset& ds,
                                               const std::vector<ParamSet>& theta_subset,
                                               const std::vector<ParamSet>& draws,
                                               const DiagnosticConfig& cfg);

}  // namespace tpp

#endif
