#include "tpplab/infer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tpplab/parallel.hpp"
#include "tpplab/stats.hpp"

namespace tpp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}  // namespace

PriorSpec PriorSpec::defaults(ModelFamily family) {
  PriorSpec spec;
  switch (family) {
    case ModelFamily::HPP:
      spec.params = {ParamPrior::gamma(1, 1)};
      break;
    case ModelFamily::NHPP_PL:
      spec.params = {ParamPrior::gamma(1, 1), ParamPrior::gamma(1, 1)};
      break;
    case ModelFamily::HAWKES_EXP:
      spec.params = {ParamPrior::gamma(1, 1), ParamPrior::gamma(1, 1), ParamPrior::gamma(1, 1)};
      break;
    case ModelFamily::HAWKES_2EXP:
      spec.params = {ParamPrior::gamma(1, 1), ParamPrior::gamma(1, 3), ParamPrior::gamma(3, 3),
                     ParamPrior::gamma(1, 3), ParamPrior::gamma(3, 3)};
      break;
    case ModelFamily::HAWKES_PL:
      spec.params = {ParamPrior::uniform(0, 2), ParamPrior::uniform(0, 4),
                     ParamPrior::uniform(0, 4), ParamPrior::uniform(1, 4)};
      break;
  }
  return spec;
}

void PriorSpec::validate(ModelFamily family) const {
  if (params.size() != param_count(family))
    throw std::invalid_argument("PriorSpec: wrong number of parameter priors");
  const auto names = param_names(family);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const bool is_pl_p = family == ModelFamily::HAWKES_PL && std::string_view(names[i]) == "p";
    if (p.type == ParamPrior::Type::Gamma) {
      if (!(p.a > 0.0) || !(p.b > 0.0))
        throw std::invalid_argument("PriorSpec: Gamma shape and rate must be > 0");
    } else {
      if (!(p.b > p.a)) throw std::invalid_argument("PriorSpec: Uniform needs hi > lo");
      const double lower_bound = is_pl_p ? 1.0 : 0.0;
      if (p.a < lower_bound)
        throw std::invalid_argument(std::string("PriorSpec: support of ") + names[i] +
                                    " extends below its constraint");
    }
  }
}

void ChainConfig::validate() const {
  if (n_chains == 0 || warmup == 0 || draws == 0)
    throw std::invalid_argument("ChainConfig: counts must be > 0");
  if (!(target_accept > 0.0) || !(target_accept < 1.0))
    throw std::invalid_argument("ChainConfig: target acceptance must be in (0,1)");
  if (max_tree_depth == 0) throw std::invalid_argument("ChainConfig: max_tree_depth must be > 0");
}

// ---------------------------------------------------------------------------
// Transforms

double Transform::constrain(double x) const {
  switch (kind) {
    case Kind::Log: return std::exp(x);
    case Kind::Logit: return lo + (hi - lo) / (1.0 + std::exp(-x));
    case Kind::ShiftedLog: return lo + std::exp(x);
  }
  return x;
}

double Transform::unconstrain(double theta) const {
  switch (kind) {
    case Kind::Log: return std::log(theta);
    case Kind::Logit: {
      const double u = (theta - lo) / (hi - lo);
      return std::log(u / (1.0 - u));
    }
    case Kind::ShiftedLog: return std::log(theta - lo);
  }
  return theta;
}

double Transform::dtheta_dx(double x) const {
  switch (kind) {
    case Kind::Log: return std::exp(x);
    case Kind::Logit: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return (hi - lo) * s * (1.0 - s);
    }
    case Kind::ShiftedLog: return std::exp(x);
  }
  return 1.0;
}

double Transform::log_jacobian(double x) const {
  switch (kind) {
    case Kind::Log: return x;
    case Kind::Logit: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return std::log(hi - lo) + std::log(s) + std::log1p(-s);
    }
    case Kind::ShiftedLog: return x;
  }
  return 0.0;
}

double Transform::dlogjac_dx(double x) const {
  switch (kind) {
    case Kind::Log: return 1.0;
    case Kind::Logit: return 1.0 - 2.0 / (1.0 + std::exp(-x));
    case Kind::ShiftedLog: return 1.0;
  }
  return 0.0;
}

std::vector<Transform> transforms_for(ModelFamily family, const PriorSpec& prior) {
  prior.validate(family);
  const auto names = param_names(family);
  std::vector<Transform> tf(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& p = prior.params[i];
    if (p.type == ParamPrior::Type::Uniform) {
      tf[i] = {Transform::Kind::Logit, p.a, p.b};
    } else if (family == ModelFamily::HAWKES_PL && std::string_view(names[i]) == "p") {
      tf[i] = {Transform::Kind::ShiftedLog, 1.0, 0.0};
    } else {
      tf[i] = {Transform::Kind::Log, 0.0, 0.0};
    }
  }
  return tf;
}

namespace {

// log density and d/dtheta; for ShiftedLog parameters the Gamma prior sits on
// theta - lo.
double log_prior(const ParamPrior& p, const Transform& tf, double theta, double* ddtheta) {
  if (p.type == ParamPrior::Type::Uniform) {
    if (ddtheta) *ddtheta = 0.0;
    return -std::log(p.b - p.a);
  }
  const double v = tf.kind == Transform::Kind::ShiftedLog ? theta - tf.lo : theta;
  if (ddtheta) *ddtheta = (p.a - 1.0) / v - p.b;
  return (p.a - 1.0) * std::log(v) - p.b * v + p.a * std::log(p.b) - std::lgamma(p.a);
}

double sample_prior(const ParamPrior& p, const Transform& tf, rng::Stream& stream) {
  if (p.type == ParamPrior::Type::Uniform) return stream.uniform(p.a, p.b);
  const double g = stream.gamma(p.a, p.b);
  return tf.kind == Transform::Kind::ShiftedLog ? tf.lo + g : g;
}

}  // namespace

PosteriorModel::PosteriorModel(ModelFamily family, const Dataset& ds, PriorSpec prior)
    : family_(family), ds_(&ds), prior_(std::move(prior)), tf_(transforms_for(family, prior_)) {}

double PosteriorModel::logp_grad(std::span<const double> x, std::span<double> grad) const {
  const std::size_t d = dim();
  const bool want_grad = !grad.empty();
  for (double xi : x) {
    if (!std::isfinite(xi)) {
      if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
      return -kInf;
    }
  }

  std::vector<double> theta(d), dll(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) theta[i] = tf_[i].constrain(x[i]);

  double ll = 0.0;
  for (const auto& seq : ds_->sequences)
    ll += raw::loglik(family_, theta, seq, want_grad ? std::span<double>(dll) : std::span<double>());
  if (!std::isfinite(ll)) {
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    return -kInf;
  }

  double lp = ll;
  for (std::size_t i = 0; i < d; ++i) {
    double dprior = 0.0;
    lp += log_prior(prior_.params[i], tf_[i], theta[i], want_grad ? &dprior : nullptr);
    lp += tf_[i].log_jacobian(x[i]);
    if (want_grad) grad[i] = (dll[i] + dprior) * tf_[i].dtheta_dx(x[i]) + tf_[i].dlogjac_dx(x[i]);
  }
  if (!std::isfinite(lp)) {
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    return -kInf;
  }
  return lp;
}

double PosteriorModel::logp(std::span<const double> x) const { return logp_grad(x, {}); }

std::vector<double> PosteriorModel::constrain(std::span<const double> x) const {
  std::vector<double> theta(dim());
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = tf_[i].constrain(x[i]);
  return theta;
}

std::vector<double> PosteriorModel::unconstrain(std::span<const double> theta) const {
  std::vector<double> x(dim());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = tf_[i].unconstrain(theta[i]);
  return x;
}

std::vector<double> PosteriorModel::initial_point(rng::Stream& stream) const {
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<double> x(dim());
    for (std::size_t i = 0; i < dim(); ++i)
      x[i] = tf_[i].unconstrain(sample_prior(prior_.params[i], tf_[i], stream));
    if (std::isfinite(logp(x))) return x;
  }
  throw std::runtime_error("could not find a finite initial point in 100 prior draws");
}

std::pair<double, std::vector<double>> log_posterior_and_grad(ModelFamily family,
                                                              std::span<const double> x,
                                                              const Dataset& ds,
                                                              const PriorSpec& prior) {
  PosteriorModel model(family, ds, prior);
  std::vector<double> grad(model.dim(), 0.0);
  const double lp = model.logp_grad(x, grad);
  return {lp, std::move(grad)};
}

// ---------------------------------------------------------------------------
// PosteriorSamples

PosteriorSamples::PosteriorSamples(ModelFamily family, std::size_t n_chains, std::size_t n_draws)
    : family_(family),
      n_chains_(n_chains),
      n_draws_(n_draws),
      draws_(n_chains * n_draws * param_count(family), 0.0) {}

double& PosteriorSamples::at(std::size_t chain, std::size_t draw, std::size_t param) {
  return draws_[(chain * n_draws_ + draw) * n_params() + param];
}

double PosteriorSamples::at(std::size_t chain, std::size_t draw, std::size_t param) const {
  return draws_[(chain * n_draws_ + draw) * n_params() + param];
}

std::vector<double> PosteriorSamples::pooled(std::size_t param) const {
  std::vector<double> out;
  out.reserve(total_draws());
  for (std::size_t c = 0; c < n_chains_; ++c)
    for (std::size_t d = 0; d < n_draws_; ++d) out.push_back(at(c, d, param));
  return out;
}

ParamSet PosteriorSamples::draw(std::size_t chain, std::size_t draw) const {
  std::vector<double> v(n_params());
  for (std::size_t p = 0; p < v.size(); ++p) v[p] = at(chain, draw, p);
  return ParamSet(family_, std::move(v));
}

std::vector<ParamSet> PosteriorSamples::all_draws() const {
  std::vector<ParamSet> out;
  out.reserve(total_draws());
  for (std::size_t c = 0; c < n_chains_; ++c)
    for (std::size_t d = 0; d < n_draws_; ++d) out.push_back(draw(c, d));
  return out;
}

ParamSet PosteriorSamples::posterior_mean() const {
  std::vector<double> m(n_params(), 0.0);
  for (std::size_t c = 0; c < n_chains_; ++c)
    for (std::size_t d = 0; d < n_draws_; ++d)
      for (std::size_t p = 0; p < n_params(); ++p) m[p] += at(c, d, p);
  for (auto& v : m) v /= static_cast<double>(total_draws());
  return ParamSet(family_, std::move(m));
}

// ---------------------------------------------------------------------------
// Chain diagnostics (rank-normalized split R-hat, bulk/tail ESS)

namespace {

struct SplitChains {
  std::vector<double> data;  // m chains of length n, chain-major
  std::size_t m = 0, n = 0;
};

SplitChains split_in_half(std::span<const double> draws, std::size_t n_chains) {
  const std::size_t per_chain = draws.size() / n_chains;
  const std::size_t half = per_chain / 2;
  SplitChains out;
  out.m = 2 * n_chains;
  out.n = half;
  out.data.reserve(out.m * out.n);
  for (std::size_t c = 0; c < n_chains; ++c) {
    const double* chain = draws.data() + c * per_chain;
    for (std::size_t i = 0; i < half; ++i) out.data.push_back(chain[i]);
    // When per_chain is odd the middle draw is dropped.
    for (std::size_t i = per_chain - half; i < per_chain; ++i) out.data.push_back(chain[i]);
  }
  return out;
}

// Average ranks for ties, then the normal quantile of (r - 3/8)/(S + 1/4).
std::vector<double> rank_normalize(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> z(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    const double val = stats::normal_quantile((rank - 0.375) / (static_cast<double>(n) + 0.25));
    for (std::size_t k = i; k < j; ++k) z[order[k]] = val;
    i = j;
  }
  return z;
}

double split_rhat(const SplitChains& sc) {
  const auto m = static_cast<double>(sc.m);
  const auto n = static_cast<double>(sc.n);
  std::vector<double> means(sc.m), vars(sc.m);
  for (std::size_t c = 0; c < sc.m; ++c) {
    std::span<const double> chain(sc.data.data() + c * sc.n, sc.n);
    means[c] = stats::mean(chain);
    vars[c] = stats::variance(chain);
  }
  const double w = stats::mean(vars);
  const double b = n * stats::variance(means);
  if (!(w > 0.0)) return kNan;
  const double var_plus = (n - 1.0) / n * w + b / n;
  (void)m;
  return std::sqrt(var_plus / w);
}

// Combined-chain ESS with Geyer's initial monotone sequence.
double ess_from_chains(const SplitChains& sc) {
  const std::size_t m = sc.m, n = sc.n;
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    std::span<const double> chain(sc.data.data() + c * n, n);
    means[c] = stats::mean(chain);
    vars[c] = stats::variance(chain);
  }
  const double w = stats::mean(vars);
  const double b = static_cast<double>(n) * stats::variance(means);
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w +
                          b / static_cast<double>(n);
  if (!(var_plus > 0.0)) return kNan;

  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double* chain = sc.data.data() + c * n;
      double acc = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i)
        acc += (chain[i] - means[c]) * (chain[i + lag] - means[c]);
      s += acc / static_cast<double>(n);
    }
    return s / static_cast<double>(m);
  };

  double tau = 1.0;  // rho_0 = 1
  double prev_pair = kInf;
  for (std::size_t lag = 1; lag + 1 < n; lag += 2) {
    const double rho_a = 1.0 - (w - acov(lag)) / var_plus;
    const double rho_b = 1.0 - (w - acov(lag + 1)) / var_plus;
    double pair = rho_a + rho_b;
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);  // initial monotone sequence
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  const double total = static_cast<double>(m * n);
  double ess = total / tau;
  ess = std::min(ess, total * std::log10(std::max(total, 10.0)));
  return ess;
}

}  // namespace

ParamDiagnostics chain_diagnostics_one(std::span<const double> draws, std::size_t n_chains) {
  if (n_chains < 2) throw std::invalid_argument("chain_diagnostics: need >= 2 chains");
  const std::size_t per_chain = draws.size() / n_chains;
  if (per_chain < 4 || draws.size() % n_chains != 0)
    throw std::invalid_argument("chain_diagnostics: need >= 4 draws per chain");

  ParamDiagnostics d;
  std::vector<double> pooled(draws.begin(), draws.end());
  d.mean = stats::mean(pooled);
  d.sd = stats::sd(pooled);
  std::sort(pooled.begin(), pooled.end());
  d.q5 = stats::quantile_sorted(pooled, 0.05);
  d.q50 = stats::quantile_sorted(pooled, 0.50);
  d.q95 = stats::quantile_sorted(pooled, 0.95);

  if (!(d.sd > 0.0)) {
    d.defined = false;
    d.r_hat = d.ess_bulk = d.ess_tail = d.mcse_mean = d.mcse_sd = kNan;
    return d;
  }

  // Bulk: rank-normalized draws; R-hat also folds around the median.
  const auto z = rank_normalize(draws);
  const auto z_split = split_in_half(z, n_chains);
  std::vector<double> folded(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) folded[i] = std::fabs(draws[i] - d.q50);
  const auto zf = rank_normalize(folded);
  const double rhat_bulk = split_rhat(z_split);
  const double rhat_tail = split_rhat(split_in_half(zf, n_chains));
  d.r_hat = std::max(rhat_bulk, rhat_tail);
  d.ess_bulk = ess_from_chains(z_split);

  auto indicator_ess = [&](double threshold, bool upper) {
    std::vector<double> ind(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i)
      ind[i] = (upper ? draws[i] >= threshold : draws[i] <= threshold) ? 1.0 : 0.0;
    return ess_from_chains(split_in_half(ind, n_chains));
  };
  d.ess_tail = std::min(indicator_ess(d.q5, false), indicator_ess(d.q95, true));

  d.mcse_mean = d.sd / std::sqrt(d.ess_bulk);
  const double e = d.ess_bulk;
  d.mcse_sd = d.sd * std::sqrt(std::exp(1.0) * std::pow(1.0 - 1.0 / e, e - 1.0) - 1.0);
  return d;
}

std::vector<ParamDiagnostics> chain_diagnostics(const PosteriorSamples& samples) {
  std::vector<ParamDiagnostics> out;
  for (std::size_t p = 0; p < samples.n_params(); ++p) {
    std::vector<double> draws;
    draws.reserve(samples.total_draws());
    for (std::size_t c = 0; c < samples.n_chains(); ++c)
      for (std::size_t d = 0; d < samples.n_draws(); ++d) draws.push_back(samples.at(c, d, p));
    out.push_back(chain_diagnostics_one(draws, samples.n_chains()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// NUTS

namespace {

struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  double count = 0.0;
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    count = 0.0;
  }

  void update(double accept_stat, double target) {
    count += 1.0;
    const double frac = 1.0 / (count + kT0);
    h_bar = (1.0 - frac) * h_bar + frac * (target - accept_stat);
    log_eps = mu - std::sqrt(count) / kGamma * h_bar;
    const double w = std::pow(count, -kKappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
  }

  double eps() const { return std::exp(log_eps); }
  double eps_bar() const { return std::exp(log_eps_bar); }
};

struct Welford {
  std::vector<double> mean, m2;
  double count = 0.0;

  explicit Welford(std::size_t d) : mean(d, 0.0), m2(d, 0.0) {}

  void add(std::span<const double> x) {
    count += 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean[i];
      mean[i] += delta / count;
      m2[i] += delta * (x[i] - mean[i]);
    }
  }

  // Sample variance shrunk toward a small diagonal, as in windowed HMC warmup.
  std::vector<double> regularized_variance() const {
    std::vector<double> v(mean.size(), 1.0);
    if (count < 2.0) return v;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double var = m2[i] / (count - 1.0);
      v[i] = count / (count + 5.0) * var + 1e-3 * (5.0 / (count + 5.0));
    }
    return v;
  }
};

class NutsChain {
 public:
  NutsChain(const PosteriorModel& model, const ChainConfig& cfg, rng::Stream stream)
      : model_(model),
        cfg_(cfg),
        stream_(std::move(stream)),
        dim_(model.dim()),
        inv_metric_(model.dim(), 1.0) {}

  struct Output {
    std::vector<double> draws;  // n_draws x dim, unconstrained
    std::size_t divergences = 0;
  };

  Output run() {
    x_ = model_.initial_point(stream_);
    grad_.assign(dim_, 0.0);
    logp_ = model_.logp_grad(x_, grad_);

    double eps = find_initial_step();
    da_.restart(eps);
    const auto windows = slow_windows();
    Welford welford(dim_);
    std::size_t window_idx = 0;

    for (std::size_t m = 0; m < cfg_.warmup; ++m) {
      const auto res = transition(da_.eps());
      da_.update(res.accept_stat, cfg_.target_accept);
      if (window_idx < windows.size()) {
        const auto [lo, hi] = windows[window_idx];
        if (m >= lo && m < hi) welford.add(x_);
        if (m + 1 == hi) {
          inv_metric_ = welford.regularized_variance();
          welford = Welford(dim_);
          ++window_idx;
          const double cur = da_.eps();
          da_.restart(cur);
        }
      }
    }

    const double eps_final = da_.eps_bar();
    Output out;
    out.draws.reserve(cfg_.draws * dim_);
    std::size_t divergent_draws = 0;
    for (std::size_t m = 0; m < cfg_.draws; ++m) {
      const auto res = transition(eps_final);
      if (res.divergent) ++divergent_draws;
      out.draws.insert(out.draws.end(), x_.begin(), x_.end());
    }
    out.divergences = divergent_draws;
    if (divergent_draws == cfg_.draws) {
      std::ostringstream os;
      os << "NUTS chain diverged on every draw (family " << to_string(model_.family())
         << ", warmup " << cfg_.warmup << ", draws " << cfg_.draws << ", target_accept "
         << cfg_.target_accept << ", step " << eps_final << ")";
      throw std::runtime_error(os.str());
    }
    return out;
  }

 private:
  struct Transition {
    double accept_stat = 0.0;
    bool divergent = false;
  };

  struct Tree {
    std::vector<double> x_minus, r_minus, g_minus;
    std::vector<double> x_plus, r_plus, g_plus;
    std::vector<double> x_sample, g_sample;
    double logp_sample = 0.0;
    double n = 0.0;
    bool keep_going = true;
    bool divergent = false;
    double alpha = 0.0;
    double n_alpha = 0.0;
  };

  double kinetic(std::span<const double> r) const {
    double k = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) k += inv_metric_[i] * r[i] * r[i];
    return 0.5 * k;
  }

  // One leapfrog step; updates x, r, grad, logp in place.
  void leapfrog(std::vector<double>& x, std::vector<double>& r, std::vector<double>& g,
                double& logp, double eps) const {
    for (std::size_t i = 0; i < dim_; ++i) r[i] += 0.5 * eps * g[i];
    for (std::size_t i = 0; i < dim_; ++i) x[i] += eps * inv_metric_[i] * r[i];
    logp = model_.logp_grad(x, g);
    for (std::size_t i = 0; i < dim_; ++i) r[i] += 0.5 * eps * g[i];
  }

  bool no_uturn(std::span<const double> x_minus, std::span<const double> x_plus,
                std::span<const double> r_minus, std::span<const double> r_plus) const {
    double fwd = 0.0, bwd = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double dx = x_plus[i] - x_minus[i];
      fwd += dx * inv_metric_[i] * r_plus[i];
      bwd += dx * inv_metric_[i] * r_minus[i];
    }
    return fwd >= 0.0 && bwd >= 0.0;
  }

  Tree build_tree(std::vector<double> x, std::vector<double> r, std::vector<double> g,
                  double logp, double log_u, int direction, std::size_t depth, double eps,
                  double h0) {
    if (depth == 0) {
      leapfrog(x, r, g, logp, direction * eps);
      const double h = -logp + kinetic(r);
      Tree t;
      t.n = (log_u <= -h) ? 1.0 : 0.0;
      t.divergent = (log_u - 1000.0) > -h;  // energy error beyond 1000
      t.keep_going = !t.divergent;
      t.alpha = std::min(1.0, std::exp(h0 - h));
      if (!std::isfinite(t.alpha)) t.alpha = 0.0;
      t.n_alpha = 1.0;
      t.x_minus = t.x_plus = t.x_sample = std::move(x);
      t.r_minus = t.r_plus = std::move(r);
      t.g_minus = t.g_plus = t.g_sample = std::move(g);
      t.logp_sample = logp;
      return t;
    }

    Tree first = build_tree(std::move(x), std::move(r), std::move(g), logp, log_u, direction,
                            depth - 1, eps, h0);
    if (!first.keep_going) return first;

    Tree second = direction < 0
                      ? build_tree(first.x_minus, first.r_minus, first.g_minus, 0.0, log_u,
                                   direction, depth - 1, eps, h0)
                      : build_tree(first.x_plus, first.r_plus, first.g_plus, 0.0, log_u,
                                   direction, depth - 1, eps, h0);
    if (direction < 0) {
      first.x_minus = second.x_minus;
      first.r_minus = second.r_minus;
      first.g_minus = second.g_minus;
    } else {
      first.x_plus = second.x_plus;
      first.r_plus = second.r_plus;
      first.g_plus = second.g_plus;
    }
    const double total = first.n + second.n;
    if (second.n > 0.0 && stream_.uniform() * total <= second.n) {
      first.x_sample = second.x_sample;
      first.g_sample = second.g_sample;
      first.logp_sample = second.logp_sample;
    }
    first.n = total;
    first.alpha += second.alpha;
    first.n_alpha += second.n_alpha;
    first.divergent = first.divergent || second.divergent;
    first.keep_going = second.keep_going && !second.divergent &&
                       no_uturn(first.x_minus, first.x_plus, first.r_minus, first.r_plus);
    return first;
  }

  Transition transition(double eps) {
    std::vector<double> r0(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      r0[i] = stream_.normal() / std::sqrt(inv_metric_[i]);
    const double h0 = -logp_ + kinetic(r0);
    const double log_u = -h0 - stream_.exponential();

    std::vector<double> x_minus = x_, x_plus = x_;
    std::vector<double> r_minus = r0, r_plus = r0;
    std::vector<double> g_minus = grad_, g_plus = grad_;
    double n = 1.0;
    Transition result;
    double alpha_sum = 0.0, n_alpha = 0.0;

    for (std::size_t depth = 0; depth < cfg_.max_tree_depth; ++depth) {
      const int direction = stream_.uniform() < 0.5 ? -1 : 1;
      Tree t = direction < 0
                   ? build_tree(x_minus, r_minus, g_minus, 0.0, log_u, direction, depth, eps, h0)
                   : build_tree(x_plus, r_plus, g_plus, 0.0, log_u, direction, depth, eps, h0);
      if (direction < 0) {
        x_minus = t.x_minus;
        r_minus = t.r_minus;
        g_minus = t.g_minus;
      } else {
        x_plus = t.x_plus;
        r_plus = t.r_plus;
        g_plus = t.g_plus;
      }
      alpha_sum += t.alpha;
      n_alpha += t.n_alpha;
      result.divergent = result.divergent || t.divergent;
      if (t.keep_going && t.n > 0.0 && stream_.uniform() * n <= t.n) {
        x_ = t.x_sample;
        grad_ = t.g_sample;
        logp_ = t.logp_sample;
      }
      n += t.n;
      if (!t.keep_going || !no_uturn(x_minus, x_plus, r_minus, r_plus)) break;
    }
    result.accept_stat = n_alpha > 0.0 ? alpha_sum / n_alpha : 0.0;
    return result;
  }

  double find_initial_step() {
    double eps = 1.0;
    std::vector<double> r0(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      r0[i] = stream_.normal() / std::sqrt(inv_metric_[i]);
    const double h0 = -logp_ + kinetic(r0);

    auto accept_prob = [&](double e) {
      auto x = x_;
      auto r = r0;
      auto g = grad_;
      double lp = logp_;
      leapfrog(x, r, g, lp, e);
      const double h1 = -lp + kinetic(r);
      return std::exp(h0 - h1);
    };

    double p = accept_prob(eps);
    int guard = 0;
    while (!std::isfinite(p) && guard++ < 60) {
      eps *= 0.5;
      p = accept_prob(eps);
    }
    const double dir = p > 0.5 ? 1.0 : -1.0;
    guard = 0;
    while (guard++ < 60) {
      p = accept_prob(eps);
      if (!std::isfinite(p)) p = 0.0;
      if (dir > 0.0 && p <= 0.5) break;
      if (dir < 0.0 && p >= 0.5) break;
      eps *= dir > 0.0 ? 2.0 : 0.5;
      if (eps < 1e-10 || eps > 1e7) break;
    }
    return std::clamp(eps, 1e-10, 1e7);
  }

  // Stan-style schedule: step-size-only buffers around doubling variance
  // windows; [lo, hi) draw index ranges.
  std::vector<std::pair<std::size_t, std::size_t>> slow_windows() const {
    std::size_t init_buf = 75, term_buf = 50, base = 25;
    const std::size_t warmup = cfg_.warmup;
    if (warmup < init_buf + term_buf + base) {
      init_buf = static_cast<std::size_t>(0.15 * static_cast<double>(warmup));
      term_buf = static_cast<std::size_t>(0.10 * static_cast<double>(warmup));
      base = warmup > init_buf + term_buf ? warmup - init_buf - term_buf : 0;
      if (base == 0) return {};
    }
    std::vector<std::pair<std::size_t, std::size_t>> windows;
    std::size_t lo = init_buf, size = base;
    const std::size_t end = warmup - term_buf;
    while (lo < end) {
      std::size_t hi = lo + size;
      if (hi + 2 * size > end) hi = end;  // absorb the remainder into the last window
      windows.emplace_back(lo, std::min(hi, end));
      lo = hi;
      size *= 2;
    }
    return windows;
  }

  const PosteriorModel& model_;
  const ChainConfig& cfg_;
  rng::Stream stream_;
  std::size_t dim_;
  std::vector<double> inv_metric_;
  std::vector<double> x_, grad_;
  double logp_ = -kInf;
  DualAveraging da_;
};

// Component-wise adaptive random-walk Metropolis; gradient-free cross-check.
class RwmChain {
 public:
  RwmChain(const PosteriorModel& model, const ChainConfig& cfg, rng::Stream stream)
      : model_(model), cfg_(cfg), stream_(std::move(stream)) {}

  NutsChain::Output run() {
    const std::size_t d = model_.dim();
    auto x = model_.initial_point(stream_);
    double logp = model_.logp(x);
    std::vector<double> log_scale(d, std::log(0.5));

    NutsChain::Output out;
    out.draws.reserve(cfg_.draws * d);
    const double target = 0.44;
    for (std::size_t m = 0; m < cfg_.warmup + cfg_.draws; ++m) {
      for (std::size_t i = 0; i < d; ++i) {
        const double old_xi = x[i];
        x[i] = old_xi + std::exp(log_scale[i]) * stream_.normal();
        const double proposal_logp = model_.logp(x);
        const double accept = std::min(1.0, std::exp(proposal_logp - logp));
        if (stream_.uniform() < accept) {
          logp = proposal_logp;
        } else {
          x[i] = old_xi;
        }
        if (m < cfg_.warmup) {
          // Robbins-Monro scale tuning toward the component-wise target.
          const double step = std::pow(static_cast<double>(m + 1), -0.6);
          log_scale[i] += step * (accept - target);
        }
      }
      if (m >= cfg_.warmup) out.draws.insert(out.draws.end(), x.begin(), x.end());
    }
    return out;
  }

 private:
  const PosteriorModel& model_;
  const ChainConfig& cfg_;
  rng::Stream stream_;
};

}  // namespace

PosteriorSamples run_nuts(ModelFamily family, const Dataset& ds, const PriorSpec& prior,
                          const ChainConfig& cfg) {
  cfg.validate();
  prior.validate(family);
  const PosteriorModel model(family, ds, prior);

  std::vector<NutsChain::Output> outputs(cfg.n_chains);
  std::vector<std::string> errors(cfg.n_chains);
  parallel_for(cfg.n_chains, [&](std::size_t c) {
    try {
      auto stream = rng::Stream::substream(cfg.seed, {0x636861696eULL, c});
      if (cfg.sampler == SamplerKind::Nuts) {
        NutsChain chain(model, cfg, std::move(stream));
        outputs[c] = chain.run();
      } else {
        RwmChain chain(model, cfg, std::move(stream));
        outputs[c] = chain.run();
      }
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  });
  for (const auto& err : errors) {
    if (!err.empty()) throw std::runtime_error(err);
  }

  PosteriorSamples samples(family, cfg.n_chains, cfg.draws);
  const std::size_t d = model.dim();
  std::size_t divergences = 0;
  for (std::size_t c = 0; c < cfg.n_chains; ++c) {
    divergences += outputs[c].divergences;
    for (std::size_t m = 0; m < cfg.draws; ++m) {
      auto theta = model.constrain(
          std::span<const double>(outputs[c].draws.data() + m * d, d));
      if (family == ModelFamily::HAWKES_2EXP && theta[2] < theta[4]) {
        std::swap(theta[1], theta[3]);
        std::swap(theta[2], theta[4]);
      }
      for (std::size_t p = 0; p < d; ++p) samples.at(c, m, p) = theta[p];
    }
  }
  samples.set_divergences(divergences);
  samples.set_diagnostics(chain_diagnostics(samples));
  return samples;
}

}  // namespace tpp
