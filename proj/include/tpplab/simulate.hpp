#ifndef TPPLAB_SIMULATE_HPP
#define TPPLAB_SIMULATE_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpplab/models.hpp"
#include "tpplab/rng.hpp"

namespace tpp {

struct SimConfig {
  std::uint64_t seed = 0;
  std::size_t max_events = 100000;  // explosion guard per simulated session
  double lookahead = 10.0;          // bound-refresh horizon for increasing intensities, minutes

  void validate() const {
    if (max_events == 0) throw std::invalid_argument("SimConfig: max_events must be > 0");
    if (!(lookahead > 0.0)) throw std::invalid_argument("SimConfig: lookahead must be > 0");
  }
};

class ExplosionError : public std::runtime_error {
 public:
  ExplosionError(ModelFamily family, double branching, std::size_t cap);
  double branching() const { return branching_; }

 private:
  double branching_;
};

// Exact Ogata thinning on [0, T). The intensity upper bound is the running
// right-limit intensity for families that are nonincreasing between events
// (all Hawkes kernels here, NHPP with k <= 1, HPP) and lambda(s + lookahead)
// for the increasing NHPP case, refreshed after every acceptance and every
// lookahead elapsed.
EventSequence thinning_simulate(const ParamSet& params, double T, const SimConfig& cfg,
                                const std::string& session_id = "sim");

// Low-level: events on (t0, t1] given the (possibly empty) observed history
// of onsets <= t0, drawing from an explicit stream.
std::vector<double> thinning_sample_window(const ParamSet& params,
                                           std::span<const double> history, double t0,
                                           double t1, const SimConfig& cfg, rng::Stream& stream);

struct ForecastDistribution {
  double t_start = 0.0;
  double dt = 0.0;
  // Event times per trajectory, within (t_start, t_start + dt].
  std::vector<std::vector<double>> trajectories;
  // Final-count quantiles at {5, 25, 50, 75, 95} percent.
  std::array<double, 5> count_quantiles{};

  std::vector<std::size_t> counts() const;
  double median_count() const { return count_quantiles[2]; }
};

// Each trajectory draws one parameter set from the posterior draws (uniform
// with replacement) and thins on (t_start, t_start + dt] seeded by the
// observed onsets <= t_start. Trajectory m uses the substream
// (seed, session_id, m), so results are independent of evaluation order.
ForecastDistribution forecast_counts(const std::vector<ParamSet>& draws,
                                     const EventSequence& seq, double t_start, double dt,
                                     std::size_t n_traj, const SimConfig& cfg);

// Posterior-predictive count sampler: per trial, |durations| sessions are
// simulated with duration drawn uniformly from the observed durations and
// parameters drawn from the posterior draws.
std::vector<std::vector<long>> count_distribution_sample(const std::vector<ParamSet>& draws,
                                                         const std::vector<double>& durations,
                                                         std::size_t n_trials,
                                                         const SimConfig& cfg);

}  // namespace tpp

#endif
