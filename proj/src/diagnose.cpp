#include "tpplab/diagnose.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tpplab/stats.hpp"

namespace tpp {

std::vector<double> rtc_transform(const ParamSet& params, const EventSequence& seq) {
  std::vector<double> tau;
  tau.reserve(seq.count());
  for (double t : seq.onsets())
    tau.push_back(raw::cumulative(params.family(), params.values(), seq.history_before(t), t));
  return tau;
}

std::vector<double> rtc_interonsets(const ParamSet& params, const EventSequence& seq) {
  auto tau = rtc_transform(params, seq);
  double prev = 0.0;
  for (double& v : tau) {
    const double gap = v - prev;
    prev = v;
    v = gap;
  }
  return tau;
}

QQData qq_points(std::vector<double> pooled_interonsets) {
  if (pooled_interonsets.size() < 2)
    throw std::invalid_argument("qq_points: need at least 2 inter-onsets");
  std::sort(pooled_interonsets.begin(), pooled_interonsets.end());
  QQData qq;
  const auto n = static_cast<double>(pooled_interonsets.size());
  qq.theoretical.reserve(pooled_interonsets.size());
  for (std::size_t i = 0; i < pooled_interonsets.size(); ++i) {
    const double p = (static_cast<double>(i) + 0.5) / n;
    qq.theoretical.push_back(-std::log1p(-p));
  }
  qq.empirical = std::move(pooled_interonsets);
  return qq;
}

RawResidual raw_residual(const ParamSet& params, const EventSequence& seq) {
  RawResidual r;
  r.n_events = seq.count();
  r.residual = static_cast<double>(seq.count()) -
               raw::cumulative(params.family(), params.values(), seq.onsets(), seq.duration());
  return r;
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein_1d: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa.size() == sb.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) s += std::fabs(sa[i] - sb[i]);
    return s / static_cast<double>(sa.size());
  }
  // Unequal sizes: integrate |F_a - F_b| over the pooled support, which
  // equals the quantile-function integral for W1.
  std::vector<double> all;
  all.reserve(sa.size() + sb.size());
  all.insert(all.end(), sa.begin(), sa.end());
  all.insert(all.end(), sb.begin(), sb.end());
  std::sort(all.begin(), all.end());
  double dist = 0.0;
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    while (ia < sa.size() && sa[ia] <= all[i]) ++ia;
    while (ib < sb.size() && sb[ib] <= all[i]) ++ib;
    const double fa = static_cast<double>(ia) / static_cast<double>(sa.size());
    const double fb = static_cast<double>(ib) / static_cast<double>(sb.size());
    dist += std::fabs(fa - fb) * (all[i + 1] - all[i]);
  }
  return dist;
}

double wasserstein_1d_counts(std::span<const long> a, std::span<const long> b) {
  std::vector<double> da(a.begin(), a.end()), db(b.begin(), b.end());
  return wasserstein_1d(da, db);
}

KdeCurve kde_curve(std::span<const double> samples, std::vector<double> grid,
                   double bandwidth_floor) {
  if (samples.size() < 2) throw std::invalid_argument("kde_curve: need at least 2 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double s = stats::sd(sorted);
  const double iqr = stats::quantile_sorted(sorted, 0.75) - stats::quantile_sorted(sorted, 0.25);
  double spread = s;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  double h = 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
  if (!(h >= bandwidth_floor)) h = bandwidth_floor;

  KdeCurve curve;
  curve.bandwidth = h;
  curve.density.resize(grid.size(), 0.0);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * M_PI));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double acc = 0.0;
    for (double x : samples) {
      const double z = (grid[i] - x) / h;
      acc += std::exp(-0.5 * z * z);
    }
    curve.density[i] = acc * norm;
  }
  curve.grid = std::move(grid);
  return curve;
}

std::vector<double> ripley_k(const EventSequence& seq, std::span<const double> lags) {
  const auto onsets = seq.onsets();
  const auto J = onsets.size();
  if (J < 2) throw std::domain_error("ripley_k: need at least 2 onsets");
  const double T = seq.duration();

  std::vector<double> k_hat(lags.size(), 0.0);
  for (std::size_t i = 0; i < J; ++i) {
    const double reach = std::min(onsets[i], T - onsets[i]);
    for (std::size_t j = 0; j < J; ++j) {
      if (i == j) continue;
      const double d = std::fabs(onsets[i] - onsets[j]);
      const double w = d <= reach ? 1.0 : 2.0;
      for (std::size_t l = 0; l < lags.size(); ++l) {
        if (d <= lags[l]) k_hat[l] += w;
      }
    }
  }
  const double scale = T / (static_cast<double>(J) * static_cast<double>(J));
  for (double& v : k_hat) v *= scale;
  return k_hat;
}

namespace {

struct MeanSd {
  double mean, sd;
};

MeanSd mean_sd(const std::vector<double>& v) {
  return {stats::mean(v), v.size() > 1 ? stats::sd(v) : 0.0};
}

}  // namespace

AuditRow quantile_outlier_audit(const std::vector<EventSequence>& sequences,
                                const std::string& source, std::size_t min_events) {
  AuditRow row;
  row.source = source;
  std::vector<double> q90s, q95s, q99s, maxs, ns, r9590s, r9995s, rmax99s, outliers;
  for (const auto& seq : sequences) {
    if (seq.count() < min_events) continue;
    auto gaps = seq.inter_onsets();
    if (gaps.empty()) continue;
    std::sort(gaps.begin(), gaps.end());
    const double q90 = stats::quantile_sorted(gaps, 0.90);
    const double q95 = stats::quantile_sorted(gaps, 0.95);
    const double q99 = stats::quantile_sorted(gaps, 0.99);
    const double mx = gaps.back();
    double n_outliers = 0.0;
    for (double g : gaps) {
      if (g > 2.0 * q99) n_outliers += 1.0;
    }
    q90s.push_back(q90);
    q95s.push_back(q95);
    q99s.push_back(q99);
    maxs.push_back(mx);
    ns.push_back(static_cast<double>(seq.count()));
    r9590s.push_back(q95 / q90);
    r9995s.push_back(q99 / q95);
    rmax99s.push_back(mx / q99);
    outliers.push_back(n_outliers);
  }
  row.n_sessions = q90s.size();
  if (row.n_sessions == 0) return row;  // empty row; caller flags it
  auto fill = [](const std::vector<double>& v, double& m, double& s) {
    const auto ms = mean_sd(v);
    m = ms.mean;
    s = ms.sd;
  };
  fill(q90s, row.q90_mean, row.q90_sd);
  fill(q95s, row.q95_mean, row.q95_sd);
  fill(q99s, row.q99_mean, row.q99_sd);
  fill(maxs, row.max_mean, row.max_sd);
  fill(ns, row.n_mean, row.n_sd);
  fill(r9590s, row.r9590_mean, row.r9590_sd);
  fill(r9995s, row.r9995_mean, row.r9995_sd);
  fill(rmax99s, row.rmax99_mean, row.rmax99_sd);
  fill(outliers, row.outlier_mean, row.outlier_sd);
  return row;
}

namespace {

DiagnosticReport build_report(const Dataset& ds, const std::vector<ParamSet>& points,
                              const std::vector<ParamSet>& draws, const DiagnosticConfig& cfg) {
  DiagnosticReport report;
  report.seed = cfg.seed;
  const auto n_points = static_cast<double>(points.size());

  // RTC pool and per-session residuals; tau and the compensator are averaged
  // over the evaluation points (a single point in the default mode).
  std::vector<double> pooled;
  for (const auto& seq : ds.sequences) {
    std::vector<double> tau(seq.count(), 0.0);
    double lambda_T = 0.0;
    for (const auto& point : points) {
      const auto one = rtc_transform(point, seq);
      for (std::size_t i = 0; i < one.size(); ++i) tau[i] += one[i];
      lambda_T +=
          raw::cumulative(point.family(), point.values(), seq.onsets(), seq.duration());
    }
    double prev = 0.0;
    for (double& v : tau) {
      v /= n_points;
      const double gap = v - prev;
      prev = v;
      pooled.push_back(gap);
    }
    report.residual_sessions.push_back(seq.session_id());
    report.residuals.push_back(
        {seq.count(), static_cast<double>(seq.count()) - lambda_T / n_points});
    report.empirical_counts.push_back(static_cast<long>(seq.count()));
  }
  if (pooled.size() >= 2) report.qq = qq_points(std::move(pooled));

  // Posterior-predictive counts and the Wasserstein discrepancy per trial.
  std::vector<double> durations;
  for (const auto& seq : ds.sequences) durations.push_back(seq.duration());
  SimConfig sim = cfg.sim;
  sim.seed = cfg.seed;
  report.model_count_trials = count_distribution_sample(draws, durations, cfg.trials, sim);
  std::vector<double> wds;
  for (const auto& trial : report.model_count_trials)
    wds.push_back(wasserstein_1d_counts(trial, report.empirical_counts));
  report.wd_mean = stats::mean(wds);
  report.wd_sd = wds.size() > 1 ? stats::sd(wds) : 0.0;

  // KDE curves on a shared grid covering both count samples.
  long max_count = 1;
  for (long c : report.empirical_counts) max_count = std::max(max_count, c);
  for (const auto& trial : report.model_count_trials)
    for (long c : trial) max_count = std::max(max_count, c);
  std::vector<double> grid;
  const double hi = static_cast<double>(max_count) + 3.0;
  const double lo = -3.0;
  const std::size_t n_grid = 256;
  for (std::size_t i = 0; i < n_grid; ++i)
    grid.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_grid - 1));
  std::vector<double> model_counts;
  for (const auto& trial : report.model_count_trials)
    for (long c : trial) model_counts.push_back(static_cast<double>(c));
  std::vector<double> emp_counts(report.empirical_counts.begin(), report.empirical_counts.end());
  if (model_counts.size() >= 2) report.kde_model = kde_curve(model_counts, grid);
  if (emp_counts.size() >= 2) report.kde_empirical = kde_curve(emp_counts, std::move(grid));

  // Ripley K for sessions with enough onsets.
  report.ripley_lags = cfg.ripley_lags;
  if (report.ripley_lags.empty()) {
    for (int t = 1; t <= 20; ++t) report.ripley_lags.push_back(static_cast<double>(t));
  }
  for (const auto& seq : ds.sequences) {
    if (seq.count() < cfg.ripley_min_onsets || seq.count() < 2) continue;
    report.ripley.push_back({seq.session_id(), ripley_k(seq, report.ripley_lags)});
  }

  // Quantile/outlier audit: synthetic sequences from the posterior draws
  // versus the observed data.
  std::vector<EventSequence> synthetic;
  const SimConfig audit_sim = cfg.sim;
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    auto stream = rng::Stream::substream(cfg.seed, {0x6175646974ULL, i});
    const auto& theta = draws[stream.uniform_index(draws.size())];
    auto events =
        thinning_sample_window(theta, {}, 0.0, ds.sequences[i].duration(), audit_sim, stream);
    while (!events.empty() && events.back() >= ds.sequences[i].duration()) events.pop_back();
    synthetic.emplace_back("synthetic-" + std::to_string(i), std::move(events),
                           ds.sequences[i].duration());
  }
  report.audit.push_back(
      quantile_outlier_audit(synthetic, std::string(to_string(points.front().family()))));
  report.audit.push_back(quantile_outlier_audit(ds.sequences, "True Data"));
  return report;
}

}  // namespace

DiagnosticReport run_diagnostics(const Dataset& ds, const ParamSet& point,
                                 const std::vector<ParamSet>& draws,
                                 const DiagnosticConfig& cfg) {
  return build_report(ds, {point}, draws, cfg);
}

DiagnosticReport run_diagnostics_draw_averaged(const Dataset& ds,
                                               const std::vector<ParamSet>& theta_subset,
                                               const std::vector<ParamSet>& draws,
                                               const DiagnosticConfig& cfg) {
  if (theta_subset.empty())
    throw std::invalid_argument("run_diagnostics_draw_averaged: empty draw subset");
  return build_report(ds, theta_subset, draws, cfg);
}

}  // namespace tpp
