#include "tpplab/evaluate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "tpplab/stats.hpp"

namespace tpp {

std::vector<double> LogLikMatrix::column(std::size_t session) const {
  std::vector<double> col(n_draws);
  for (std::size_t m = 0; m < n_draws; ++m) col[m] = at(m, session);
  return col;
}

LogLikMatrix pointwise_loglik(ModelFamily family, const std::vector<ParamSet>& draws,
                              const Dataset& ds) {
  if (draws.empty() || ds.sequences.empty())
    throw std::invalid_argument("pointwise_loglik: empty draws or dataset");
  LogLikMatrix m;
  m.n_draws = draws.size();
  m.n_sessions = ds.sequences.size();
  m.values.resize(m.n_draws * m.n_sessions);
  for (std::size_t d = 0; d < m.n_draws; ++d) {
    for (std::size_t s = 0; s < m.n_sessions; ++s)
      m.at(d, s) = raw::loglik(family, draws[d].values(), ds.sequences[s], {});
  }
  return m;
}

const char* to_string(ParetoCategory c) {
  switch (c) {
    case ParetoCategory::Good: return "good";
    case ParetoCategory::Ok: return "ok";
    case ParetoCategory::Bad: return "bad";
    case ParetoCategory::Undefined: return "undefined";
  }
  return "?";
}

ParetoCategory pareto_category(double k) {
  if (std::isnan(k)) return ParetoCategory::Undefined;
  if (k <= 0.5) return ParetoCategory::Good;
  if (k <= 0.7) return ParetoCategory::Ok;
  return ParetoCategory::Bad;
}

std::size_t LooResult::count(ParetoCategory c) const {
  std::size_t n = 0;
  for (const auto& s : sessions)
    if (s.category == c) ++n;
  return n;
}

GpdFit fit_generalized_pareto(std::vector<double> exceedances) {
  GpdFit fit;
  std::sort(exceedances.begin(), exceedances.end());
  const std::size_t n = exceedances.size();
  if (n < 5 || !(exceedances.back() > 0.0)) return fit;

  const auto nd = static_cast<double>(n);
  const std::size_t m_grid = 30 + static_cast<std::size_t>(std::sqrt(nd));
  const double quart = exceedances[static_cast<std::size_t>(nd / 4.0 + 0.5) - 1];
  if (!(quart > 0.0)) return fit;

  std::vector<double> theta(m_grid), loglik(m_grid);
  for (std::size_t j = 0; j < m_grid; ++j) {
    theta[j] = 1.0 / exceedances.back() +
               (1.0 - std::sqrt(static_cast<double>(m_grid) / (static_cast<double>(j) + 0.5))) /
                   (3.0 * quart);
    double k = 0.0;
    for (double x : exceedances) k += std::log1p(-theta[j] * x);
    k /= -nd;
    loglik[j] = nd * (std::log(theta[j] / k) + k - 1.0);
  }
  const double lse = stats::logsumexp(loglik);
  double theta_hat = 0.0;
  for (std::size_t j = 0; j < m_grid; ++j) theta_hat += theta[j] * std::exp(loglik[j] - lse);

  double k = 0.0;
  for (double x : exceedances) k += std::log1p(-theta_hat * x);
  k /= nd;
  fit.sigma = -k / theta_hat;
  // Weakly informative shrinkage toward k = 0.5.
  fit.k = (k * nd + 5.0) / (nd + 10.0);
  fit.defined = std::isfinite(fit.k) && std::isfinite(fit.sigma) && fit.sigma > 0.0;
  return fit;
}

namespace {

double gpd_quantile(double p, double k, double sigma) {
  if (std::fabs(k) < 1e-12) return -sigma * std::log1p(-p);
  return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

struct PsisResult {
  std::vector<double> log_weights;
  double pareto_k = 0.0;
  bool k_defined = false;
};

// Smooth the upper tail of the log importance ratios in place.
PsisResult psis_smooth(std::vector<double> log_ratios) {
  const std::size_t m = log_ratios.size();
  PsisResult out;
  const double mx = *std::max_element(log_ratios.begin(), log_ratios.end());
  for (double& lw : log_ratios) lw -= mx;

  const auto tail_len = static_cast<std::size_t>(
      std::ceil(std::min(0.2 * static_cast<double>(m), 3.0 * std::sqrt(static_cast<double>(m)))));
  if (tail_len >= 5 && tail_len < m) {
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return log_ratios[a] < log_ratios[b]; });
    const double cutoff = std::exp(log_ratios[order[m - tail_len - 1]]);
    std::vector<double> exceedances(tail_len);
    for (std::size_t i = 0; i < tail_len; ++i)
      exceedances[i] = std::exp(log_ratios[order[m - tail_len + i]]) - cutoff;
    const auto fit = fit_generalized_pareto(exceedances);
    if (fit.defined) {
      out.pareto_k = fit.k;
      out.k_defined = true;
      for (std::size_t i = 0; i < tail_len; ++i) {
        const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(tail_len);
        const double smoothed = cutoff + gpd_quantile(p, fit.k, fit.sigma);
        // Truncate at the raw maximum (log scale 0 after shifting).
        log_ratios[order[m - tail_len + i]] = std::min(std::log(smoothed), 0.0);
      }
    }
  }
  out.log_weights = std::move(log_ratios);
  return out;
}

}  // namespace

LooResult psis_loo(const LogLikMatrix& loglik, const std::vector<std::string>& session_ids,
                   const std::vector<std::size_t>& event_counts) {
  if (loglik.n_draws < 100)
    throw std::invalid_argument("psis_loo: needs at least 100 posterior draws");
  if (session_ids.size() != loglik.n_sessions || event_counts.size() != loglik.n_sessions)
    throw std::invalid_argument("psis_loo: session metadata size mismatch");

  LooResult result;
  std::vector<double> pointwise;
  for (std::size_t s = 0; s < loglik.n_sessions; ++s) {
    const auto col = loglik.column(s);
    std::vector<double> log_ratios(col.size());
    for (std::size_t m = 0; m < col.size(); ++m) log_ratios[m] = -col[m];
    auto psis = psis_smooth(std::move(log_ratios));

    std::vector<double> num(col.size());
    for (std::size_t m = 0; m < col.size(); ++m) num[m] = psis.log_weights[m] + col[m];
    const double elpd = stats::logsumexp(num) - stats::logsumexp(psis.log_weights);

    LooSession sess;
    sess.session_id = session_ids[s];
    sess.elpd = elpd;
    sess.elpd_per_event = elpd / std::max<double>(1.0, static_cast<double>(event_counts[s]));
    if (psis.k_defined) {
      sess.pareto_k = psis.pareto_k;
      sess.category = pareto_category(psis.pareto_k);
    } else {
      sess.pareto_k = std::numeric_limits<double>::quiet_NaN();
      sess.category = ParetoCategory::Undefined;
    }
    result.sessions.push_back(std::move(sess));
    pointwise.push_back(elpd);
    result.elpd_total += elpd;
  }
  result.se = std::sqrt(static_cast<double>(pointwise.size()) * stats::variance(pointwise));
  return result;
}

double occupancy_probability(const ParamSet& params, const EventSequence& seq, double t_start,
                             double dt) {
  if (!(t_start >= 0.0) || !(dt >= 0.0) || t_start + dt > seq.duration())
    throw std::invalid_argument("occupancy_probability: window outside session " +
                                seq.session_id());
  const auto history = seq.history_through(t_start);
  const double delta =
      raw::cumulative_increment(params.family(), params.values(), history, t_start, dt);
  return -std::expm1(-delta);
}

namespace {

long count_in_window(const EventSequence& seq, double t_start, double dt) {
  const auto onsets = seq.onsets();
  const auto lo = std::upper_bound(onsets.begin(), onsets.end(), t_start);
  const auto hi = std::upper_bound(onsets.begin(), onsets.end(), t_start + dt);
  return static_cast<long>(hi - lo);
}

constexpr std::uint64_t kMapeTag = 0x6d617065ULL;
constexpr std::uint64_t kRocTag = 0x726f63ULL;

}  // namespace

MapeResult mape_protocol(ModelFamily family, const std::vector<ParamSet>& draws,
                         const Dataset& ds, double dt, std::size_t n_starts,
                         std::size_t n_traj, std::uint64_t seed, const SimConfig& sim) {
  if (draws.empty()) throw std::invalid_argument("mape_protocol: no posterior draws");
  if (!(dt > 0.0)) throw std::invalid_argument("mape_protocol: dt must be > 0");
  (void)family;
  const std::uint64_t dt_bits = std::bit_cast<std::uint64_t>(dt);

  MapeResult res;
  std::vector<double> errors;
  for (const auto& seq : ds.sequences) {
    if (seq.duration() < 2.0 * dt) {
      ++res.sessions_skipped;
      continue;
    }
    ++res.sessions_used;
    auto start_stream = rng::Stream::substream(
        seed, {kMapeTag, rng::hash_str(seq.session_id()), dt_bits});
    for (std::size_t w = 0; w < n_starts; ++w) {
      const double t_start = start_stream.uniform(dt, seq.duration() - dt);
      SimConfig cfg = sim;
      cfg.seed =
          rng::derive_seed(seed, {kMapeTag, rng::hash_str(seq.session_id()), dt_bits, w});
      const auto fd = forecast_counts(draws, seq, t_start, dt, n_traj, cfg);

      WindowSample sample;
      sample.session_id = seq.session_id();
      sample.t_start = t_start;
      sample.dt = dt;
      sample.true_count = count_in_window(seq, t_start, dt);
      sample.label = sample.true_count >= 1 ? 1 : 0;
      sample.predicted_median = fd.median_count();
      const double denom = std::max(1.0, static_cast<double>(sample.true_count));
      errors.push_back(100.0 *
                       std::fabs(static_cast<double>(sample.true_count) -
                                 sample.predicted_median) /
                       denom);
      res.samples.push_back(std::move(sample));
    }
  }
  if (errors.empty())
    throw std::invalid_argument("mape_protocol: no session qualifies at dt=" +
                                std::to_string(dt));
  res.mape = stats::mean(errors);
  res.windows = errors.size();
  return res;
}

RocAucResult rocauc_protocol(const ParamSet& point, const Dataset& ds, double dt,
                             std::size_t n_starts, std::uint64_t seed) {
  RocAucResult res;
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& seq : ds.sequences) {
    if (seq.duration() < 2.0 * dt) {
      ++res.sessions_skipped;
      continue;
    }
    ++res.sessions_used;
    auto stream = rng::Stream::substream(seed, {kRocTag, rng::hash_str(seq.session_id())});
    for (std::size_t w = 0; w < n_starts; ++w) {
      const double t_start = stream.uniform(dt, seq.duration() - dt);
      WindowSample sample;
      sample.session_id = seq.session_id();
      sample.t_start = t_start;
      sample.dt = dt;
      sample.true_count = count_in_window(seq, t_start, dt);
      sample.label = sample.true_count >= 1 ? 1 : 0;
      sample.occupancy_prob = occupancy_probability(point, seq, t_start, dt);
      scores.push_back(sample.occupancy_prob);
      labels.push_back(sample.label);
      res.samples.push_back(std::move(sample));
    }
  }
  res.n_samples = scores.size();
  for (int l : labels) {
    if (l != 0)
      ++res.n_positive;
    else
      ++res.n_negative;
  }
  if (res.n_positive > 0 && res.n_negative > 0) {
    res.auc = stats::rank_auc(scores, labels);
    res.defined = true;
  }
  return res;
}

}  // namespace tpp
