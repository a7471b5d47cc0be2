#ifndef TPPLAB_EVALUATE_HPP
#define TPPLAB_EVALUATE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tpplab/infer.hpp"
#include "tpplab/simulate.hpp"

namespace tpp {

// Per-session log-likelihood at every posterior draw; draw-major storage.
struct LogLikMatrix {
  std::size_t n_draws = 0;
  std::size_t n_sessions = 0;
  std::vector<double> values;

  double& at(std::size_t draw, std::size_t session) {
    return values[draw * n_sessions + session];
  }
  double at(std::size_t draw, std::size_t session) const {
    return values[draw * n_sessions + session];
  }
  std::vector<double> column(std::size_t session) const;
};

LogLikMatrix pointwise_loglik(ModelFamily family, const std::vector<ParamSet>& draws,
                              const Dataset& ds);

enum class ParetoCategory { Good, Ok, Bad, Undefined };
const char* to_string(ParetoCategory c);

// Standard thresholds: good <= 0.5 < ok <= 0.7 < bad.
ParetoCategory pareto_category(double k);

struct LooSession {
  std::string session_id;
  double elpd = 0.0;
  double elpd_per_event = 0.0;  // divided by max(1, J_i)
  double pareto_k = 0.0;
  ParetoCategory category = ParetoCategory::Undefined;
};

struct LooResult {
  double elpd_total = 0.0;
  double se = 0.0;
  std::vector<LooSession> sessions;

  std::size_t count(ParetoCategory c) const;
};

// Pareto-smoothed importance-sampling LOO. Importance ratios are 1/p(S_i|??);
// the largest ceil(min(0.2 M, 3 sqrt(M))) ratios are replaced by expected
// order statistics of a fitted generalized Pareto tail, truncated at the raw
// maximum. Requires >= 100 draws.
LooResult psis_loo(const LogLikMatrix& loglik, const std::vector<std::string>& session_ids,
                   const std::vector<std::size_t>& event_counts);

// Generalized Pareto tail-shape fit (Zhang-Stephens with the weakly
// informative shrinkage used by standard PSIS implementations). Exposed for
// testing.
struct GpdFit {
  double k = 0.0;
  double sigma = 0.0;
  bool defined = false;
};
GpdFit fit_generalized_pareto(std::vector<double> exceedances);

struct WindowSample {
  std::string session_id;
  double t_start = 0.0;
  double dt = 0.0;
  long true_count = 0;
  int label = 0;  // true_count >= 1
  double predicted_median = std::numeric_limits<double>::quiet_NaN();
  double occupancy_prob = std::numeric_limits<double>::quiet_NaN();
};

struct MapeResult {
  double mape = 0.0;  // mean over all windows
  std::size_t windows = 0;
  std::size_t sessions_used = 0;
  std::size_t sessions_skipped = 0;  // T < 2*dt
  std::vector<WindowSample> samples;
};

// Forecast protocol: per qualifying session, n_starts uniform window starts
// in [dt, T - dt]; the prediction is the median count of n_traj thinned
// trajectories conditioned on the onsets up to the start.
MapeResult mape_protocol(ModelFamily family, const std::vector<ParamSet>& draws,
                         const Dataset& ds, double dt, std::size_t n_starts,
                         std::size_t n_traj, std::uint64_t seed, const SimConfig& sim = {});

// P(at least one onset in (t_start, t_start+dt]) with the history frozen at
// t_start: 1 - exp(-(Lambda(t_start+dt) - Lambda(t_start))).
double occupancy_probability(const ParamSet& params, const EventSequence& seq, double t_start,
                             double dt);

struct RocAucResult {
  double auc = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;  // false when all labels agree
  std::size_t n_samples = 0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::size_t sessions_used = 0;
  std::size_t sessions_skipped = 0;
  std::vector<WindowSample> samples;
};

// Window-occupancy classification scored at a single parameter point
// (typically the posterior mean), AUC by midrank statistic.
RocAucResult rocauc_protocol(const ParamSet& point, const Dataset& ds, double dt,
                             std::size_t n_starts, std::uint64_t seed);

}  // namespace tpp

#endif
