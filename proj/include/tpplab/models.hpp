#ifndef TPPLAB_MODELS_HPP
#define TPPLAB_MODELS_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tpplab/events.hpp"

namespace tpp {

enum class ModelFamily { HPP, NHPP_PL, HAWKES_EXP, HAWKES_2EXP, HAWKES_PL };

const char* to_string(ModelFamily f);
ModelFamily family_from_string(const std::string& s);
bool is_hawkes(ModelFamily f);
std::size_t param_count(ModelFamily f);
std::span<const char* const> param_names(ModelFamily f);

// Named, constraint-checked parameter vector. Canonical orders:
//   HPP          {mu}
//   NHPP_PL      {alpha, k}
//   HAWKES_EXP   {mu, alpha, beta}
//   HAWKES_2EXP  {mu, alpha1, beta1, alpha2, beta2}   with beta1 > beta2
//   HAWKES_PL    {mu, k, c, p}                        with p > 1
// All parameters must be finite and >= 0. HAWKES_2EXP kernels are exchangeable
// in the likelihood; construction swaps them into the fast-kernel-first order.
class ParamSet {
 public:
  ParamSet(ModelFamily family, std::vector<double> values);
  static ParamSet from_named(ModelFamily family, const std::map<std::string, double>& named);

  ModelFamily family() const { return family_; }
  std::span<const double> values() const { return values_; }
  double value(std::string_view name) const;
  std::map<std::string, double> named() const;

 private:
  ModelFamily family_;
  std::vector<double> values_;
};

// Conditional intensity at t given the onsets strictly before t (left limit;
// an onset exactly at t is excluded). NHPP_PL with k < 1 diverges at t = 0 and
// returns +infinity, never a clipped value.
double intensity(const ParamSet& params, const EventSequence& seq, double t);

// Right limit: history includes an onset exactly at t.
double intensity_post(const ParamSet& params, const EventSequence& seq, double t);

// Integrated intensity on [0, t], closed form per family.
double cumulative_intensity(const ParamSet& params, const EventSequence& seq, double t);

// Session log-likelihood sum_j log lambda*(t_j) - Lambda*(T). +-infinity are
// legal values and propagate. NHPP_PL excludes onsets at exactly t = 0 from
// the event sum (divergent or zero intensity at the window edge).
double log_likelihood(const ParamSet& params, const EventSequence& seq);

// Dataset log-likelihood: independent sessions, summed in sequence order.
double log_likelihood(const ParamSet& params, const Dataset& ds);

// Exact analytic gradient, same layout as the parameter vector. Requires a
// strictly interior point: any parameter whose boundary is reachable from the
// constraint set must be positive (and p > 1), except the Hawkes infectivity
// weights which may sit at zero.
std::vector<double> grad_log_likelihood(const ParamSet& params, const EventSequence& seq);
std::vector<double> grad_log_likelihood(const ParamSet& params, const Dataset& ds);

enum class Criticality { Subcritical, Critical, Supercritical };

// Integral of the triggering kernel; throws std::domain_error for non-Hawkes
// families.
double branching_factor(const ParamSet& params);
Criticality criticality(double branching);
const char* to_string(Criticality c);

namespace raw {

// Unchecked evaluation on a raw canonical-order parameter vector. No
// validation, no kernel reordering; this is the sampler and oracle path.
// When grad is non-empty it must have param_count(f) entries; gradient
// contributions are accumulated into it.
double loglik(ModelFamily f, std::span<const double> p, const EventSequence& seq,
              std::span<double> grad);
double intensity(ModelFamily f, std::span<const double> p, std::span<const double> history,
                 double t);
double cumulative(ModelFamily f, std::span<const double> p, std::span<const double> history,
                  double t);
// Lambda(t0 + dt) - Lambda(t0) with the history frozen (all listed events
// contribute over the whole interval); the baseline term uses dt directly so
// equal-width windows of a constant-rate model yield bit-identical values.
double cumulative_increment(ModelFamily f, std::span<const double> p,
                            std::span<const double> history, double t0, double dt);

}  // namespace raw

}  // namespace tpp

#endif
