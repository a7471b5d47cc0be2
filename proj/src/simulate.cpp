#include "tpplab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tpplab/stats.hpp"

namespace tpp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Running intensity state at a moving clock position. For the exponential
// kernels the decayed sums advance in O(1); the power-law kernel rescans its
// history per query.
class Thinner {
 public:
  Thinner(ModelFamily f, std::span<const double> p) : f_(f), p_(p) {}

  void seed_history(std::span<const double> events, double t0) {
    pos_ = t0;
    switch (f_) {
      case ModelFamily::HAWKES_EXP:
        for (double tj : events) s1_ += std::exp(-p_[2] * (t0 - tj));
        break;
      case ModelFamily::HAWKES_2EXP:
        for (double tj : events) {
          s1_ += std::exp(-p_[2] * (t0 - tj));
          s2_ += std::exp(-p_[4] * (t0 - tj));
        }
        break;
      case ModelFamily::HAWKES_PL:
        pl_events_.assign(events.begin(), events.end());
        break;
      default:
        break;
    }
  }

  void advance(double t) {
    const double d = t - pos_;
    switch (f_) {
      case ModelFamily::HAWKES_EXP:
        s1_ *= std::exp(-p_[2] * d);
        break;
      case ModelFamily::HAWKES_2EXP:
        s1_ *= std::exp(-p_[2] * d);
        s2_ *= std::exp(-p_[4] * d);
        break;
      default:
        break;
    }
    pos_ = t;
  }

  void add_event() {
    switch (f_) {
      case ModelFamily::HAWKES_EXP:
        s1_ += 1.0;
        break;
      case ModelFamily::HAWKES_2EXP:
        s1_ += 1.0;
        s2_ += 1.0;
        break;
      case ModelFamily::HAWKES_PL:
        pl_events_.push_back(pos_);
        break;
      default:
        break;
    }
  }

  // Intensity at the current position; events recorded at exactly pos_ are
  // included, so right after add_event this is the post-jump value.
  double lambda() const {
    switch (f_) {
      case ModelFamily::HPP:
        return p_[0];
      case ModelFamily::NHPP_PL: {
        const double coef = p_[0] * p_[1];
        if (coef == 0.0) return 0.0;
        return coef * std::pow(pos_, p_[1] - 1.0);
      }
      case ModelFamily::HAWKES_EXP:
        return p_[0] + p_[1] * p_[2] * s1_;
      case ModelFamily::HAWKES_2EXP:
        return p_[0] + p_[1] * p_[2] * s1_ + p_[3] * p_[4] * s2_;
      case ModelFamily::HAWKES_PL: {
        double s = 0.0;
        for (double tj : pl_events_) s += std::pow(p_[2] + (pos_ - tj), -p_[3]);
        return p_[0] + p_[1] * s;
      }
    }
    return 0.0;
  }

  bool increasing() const { return f_ == ModelFamily::NHPP_PL && p_[1] > 1.0; }

  double bound(double lookahead) const {
    if (!increasing()) return lambda();
    const double t = pos_ + lookahead;
    return p_[0] * p_[1] * std::pow(t, p_[1] - 1.0);
  }

  double position() const { return pos_; }

 private:
  ModelFamily f_;
  std::span<const double> p_;
  double pos_ = 0.0;
  double s1_ = 0.0, s2_ = 0.0;
  std::vector<double> pl_events_;
};

std::vector<double> thin_window(const ParamSet& params, std::span<const double> history,
                                double t0, double t1, const SimConfig& cfg,
                                rng::Stream& stream) {
  cfg.validate();
  const auto f = params.family();
  const auto p = params.values();

  Thinner state(f, p);
  double start = t0;
  // The decreasing NHPP intensity is unbounded at 0; the skipped initial
  // sliver carries negligible integrated intensity.
  if (f == ModelFamily::NHPP_PL && p[1] < 1.0 && start == 0.0) start = t1 * 1e-12;
  state.seed_history(history, start);

  std::vector<double> events;
  double expiry = state.increasing() ? start + cfg.lookahead : kInf;
  for (;;) {
    const double m = state.bound(cfg.lookahead);
    if (!(m > 0.0)) break;
    const double proposal = state.position() + stream.exponential() / m;
    if (proposal > std::min(expiry, t1)) {
      if (expiry < t1) {
        state.advance(expiry);
        expiry += cfg.lookahead;
        continue;
      }
      break;
    }
    state.advance(proposal);
    const double lam = state.lambda();
    if (stream.uniform() * m <= lam) {
      events.push_back(proposal);
      state.add_event();
      if (state.increasing()) expiry = proposal + cfg.lookahead;
      if (events.size() >= cfg.max_events) {
        double bf = std::numeric_limits<double>::quiet_NaN();
        if (is_hawkes(f)) bf = branching_factor(params);
        throw ExplosionError(f, bf, cfg.max_events);
      }
    }
  }
  return events;
}

}  // namespace

ExplosionError::ExplosionError(ModelFamily family, double branching, std::size_t cap)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "simulation of " << to_string(family) << " exceeded " << cap << " events";
        if (std::isfinite(branching))
          os << " (branching factor " << branching << ", " << to_string(criticality(branching))
             << ")";
        return os.str();
      }()),
      branching_(branching) {}

EventSequence thinning_simulate(const ParamSet& params, double T, const SimConfig& cfg,
                                const std::string& session_id) {
  if (!(T > 0.0)) throw std::invalid_argument("thinning_simulate: T must be > 0");
  auto stream = rng::Stream::substream(cfg.seed, {rng::hash_str(session_id)});
  auto events = thin_window(params, {}, 0.0, T, cfg, stream);
  // Events are generated on (0, T]; the sequence window is [0, T).
  while (!events.empty() && events.back() >= T) events.pop_back();
  return EventSequence(session_id, std::move(events), T);
}

std::vector<double> thinning_sample_window(const ParamSet& params,
                                           std::span<const double> history, double t0,
                                           double t1, const SimConfig& cfg,
                                           rng::Stream& stream) {
  return thin_window(params, history, t0, t1, cfg, stream);
}

std::vector<std::size_t> ForecastDistribution::counts() const {
  std::vector<std::size_t> out;
  out.reserve(trajectories.size());
  for (const auto& tr : trajectories) out.push_back(tr.size());
  return out;
}

ForecastDistribution forecast_counts(const std::vector<ParamSet>& draws,
                                     const EventSequence& seq, double t_start, double dt,
                                     std::size_t n_traj, const SimConfig& cfg) {
  if (draws.empty()) throw std::invalid_argument("forecast_counts: no parameter draws");
  if (n_traj == 0) throw std::invalid_argument("forecast_counts: n_traj must be > 0");
  if (!(dt > 0.0) || !(dt <= t_start) || !(t_start <= seq.duration() - dt))
    throw std::invalid_argument("forecast_counts: window violates dt <= t_start <= T - dt in session " +
                                seq.session_id());

  const auto history = seq.history_through(t_start);
  ForecastDistribution fd;
  fd.t_start = t_start;
  fd.dt = dt;
  fd.trajectories.resize(n_traj);
  for (std::size_t m = 0; m < n_traj; ++m) {
    auto stream = rng::Stream::substream(cfg.seed, {rng::hash_str(seq.session_id()), m});
    const auto& theta = draws[stream.uniform_index(draws.size())];
    fd.trajectories[m] = thin_window(theta, history, t_start, t_start + dt, cfg, stream);
  }

  std::vector<double> counts;
  counts.reserve(n_traj);
  for (const auto& tr : fd.trajectories) counts.push_back(static_cast<double>(tr.size()));
  std::sort(counts.begin(), counts.end());
  const double percents[5] = {0.05, 0.25, 0.50, 0.75, 0.95};
  for (int i = 0; i < 5; ++i) fd.count_quantiles[i] = stats::quantile_sorted(counts, percents[i]);
  return fd;
}

std::vector<std::vector<long>> count_distribution_sample(const std::vector<ParamSet>& draws,
                                                         const std::vector<double>& durations,
                                                         std::size_t n_trials,
                                                         const SimConfig& cfg) {
  if (draws.empty()) throw std::invalid_argument("count_distribution_sample: no parameter draws");
  if (durations.empty())
    throw std::invalid_argument("count_distribution_sample: no session durations");

  constexpr std::uint64_t kCountTag = 0x636f756e74ULL;
  std::vector<std::vector<long>> trials(n_trials);
  for (std::size_t trial = 0; trial < n_trials; ++trial) {
    auto& counts = trials[trial];
    counts.reserve(durations.size());
    for (std::size_t j = 0; j < durations.size(); ++j) {
      auto stream = rng::Stream::substream(cfg.seed, {kCountTag, trial, j});
      const double T = durations[stream.uniform_index(durations.size())];
      const auto& theta = draws[stream.uniform_index(draws.size())];
      const auto events = thin_window(theta, {}, 0.0, T, cfg, stream);
      long n = 0;
      for (double t : events) {
        if (t < T) ++n;
      }
      counts.push_back(n);
    }
  }
  return trials;
}

}  // namespace tpp
