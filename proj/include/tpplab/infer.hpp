#ifndef TPPLAB_INFER_HPP
#define TPPLAB_INFER_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tpplab/events.hpp"
#include "tpplab/models.hpp"
#include "tpplab/rng.hpp"

namespace tpp {

struct ParamPrior {
  enum class Type { Gamma, Uniform };
  Type type = Type::Gamma;
  // Gamma(shape, rate) or Uniform(lo, hi).
  double a = 1.0;
  double b = 1.0;

  static ParamPrior gamma(double shape, double rate) {
    return {Type::Gamma, shape, rate};
  }
  static ParamPrior uniform(double lo, double hi) {
    return {Type::Uniform, lo, hi};
  }
};

struct PriorSpec {
  std::vector<ParamPrior> params;

  // Paper defaults. Gamma is parameterized (shape, rate) throughout.
  static PriorSpec defaults(ModelFamily family);
  void validate(ModelFamily family) const;
};

enum class SamplerKind { Nuts, RandomWalk };

struct ChainConfig {
  std::size_t n_chains = 4;
  std::size_t warmup = 6000;
  std::size_t draws = 4000;  // kept draws per chain
  double target_accept = 0.99;
  std::size_t max_tree_depth = 10;
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::Nuts;

  void validate() const;
};

struct ParamDiagnostics {
  double r_hat = 0.0;
  double ess_bulk = 0.0;
  double ess_tail = 0.0;
  double mcse_mean = 0.0;
  double mcse_sd = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double q5 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
  bool defined = true;  // false for constant chains: convergence fields unusable
};

class PosteriorSamples {
 public:
  PosteriorSamples(ModelFamily family, std::size_t n_chains, std::size_t n_draws);

  ModelFamily family() const { return family_; }
  std::size_t n_chains() const { return n_chains_; }
  std::size_t n_draws() const { return n_draws_; }
  std::size_t n_params() const { return param_count(family_); }
  std::size_t total_draws() const { return n_chains_ * n_draws_; }

  double& at(std::size_t chain, std::size_t draw, std::size_t param);
  double at(std::size_t chain, std::size_t draw, std::size_t param) const;

  // Pooled draws of one parameter, chain-major.
  std::vector<double> pooled(std::size_t param) const;
  // One draw as a ParamSet (canonicalized at construction).
  ParamSet draw(std::size_t chain, std::size_t draw) const;
  std::vector<ParamSet> all_draws() const;
  ParamSet posterior_mean() const;

  const std::vector<ParamDiagnostics>& diagnostics() const { return diag_; }
  std::size_t divergences() const { return divergences_; }

  void set_diagnostics(std::vector<ParamDiagnostics> d) { diag_ = std::move(d); }
  void set_divergences(std::size_t n) { divergences_ = n; }

 private:
  ModelFamily family_;
  std::size_t n_chains_, n_draws_;
  std::vector<double> draws_;  // [chain][draw][param]
  std::vector<ParamDiagnostics> diag_;
  std::size_t divergences_ = 0;
};

// Monotone map from the unconstrained sampling space to one parameter.
struct Transform {
  enum class Kind { Log, Logit, ShiftedLog };
  Kind kind = Kind::Log;
  double lo = 0.0;
  double hi = 1.0;

  double constrain(double x) const;
  double unconstrain(double theta) const;
  double dtheta_dx(double x) const;
  double log_jacobian(double x) const;
  double dlogjac_dx(double x) const;
};

// Log for Gamma-prior positive parameters, scaled logit for Uniform(lo, hi),
// shifted log for the power-law exponent p when its prior is Gamma (density
// placed on p - 1 so the support is exactly (1, inf)).
std::vector<Transform> transforms_for(ModelFamily family, const PriorSpec& prior);

// Log posterior (log prior + log likelihood + log |Jacobian|) and its gradient
// at an unconstrained point. Non-finite likelihoods yield -inf with a zeroed
// gradient, which the samplers treat as rejection.
class PosteriorModel {
 public:
  PosteriorModel(ModelFamily family, const Dataset& ds, PriorSpec prior);

  std::size_t dim() const { return tf_.size(); }
  ModelFamily family() const { return family_; }

  double logp_grad(std::span<const double> x, std::span<double> grad) const;
  double logp(std::span<const double> x) const;

  std::vector<double> constrain(std::span<const double> x) const;
  std::vector<double> unconstrain(std::span<const double> theta) const;

  // Prior draw in unconstrained space, rejected until the log posterior is
  // finite (bounded retries).
  std::vector<double> initial_point(rng::Stream& stream) const;

  const PriorSpec& prior() const { return prior_; }
  const Dataset& dataset() const { return *ds_; }

 private:
  ModelFamily family_;
  const Dataset* ds_;
  PriorSpec prior_;
  std::vector<Transform> tf_;
};

std::pair<double, std::vector<double>> log_posterior_and_grad(ModelFamily family,
                                                              std::span<const double> x,
                                                              const Dataset& ds,
                                                              const PriorSpec& prior);

// Rank-normalized split R-hat, bulk/tail ESS and MCSEs for one parameter.
// draws is chain-major with n_draws per chain; needs >= 2 chains and >= 4
// draws per chain.
ParamDiagnostics chain_diagnostics_one(std::span<const double> draws, std::size_t n_chains);
std::vector<ParamDiagnostics> chain_diagnostics(const PosteriorSamples& samples);

// Run the configured sampler: NUTS (dual-averaging step size to the target
// acceptance, diagonal mass-matrix warmup windows, multiplicative doubling
// with the U-turn criterion) or the component-wise adaptive random-walk
// fallback. Kept draws are mapped back to constrained space, HAWKES_2EXP
// draws are canonicalized to beta1 > beta2, and diagnostics are attached.
PosteriorSamples run_nuts(ModelFamily family, const Dataset& ds, const PriorSpec& prior,
                          const ChainConfig& cfg);

}  // namespace tpp

#endif
