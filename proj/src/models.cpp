#include "tpplab/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tpp {

namespace {

constexpr const char* kHppNames[] = {"mu"};
constexpr const char* kNhppNames[] = {"alpha", "k"};
constexpr const char* kExpNames[] = {"mu", "alpha", "beta"};
constexpr const char* k2ExpNames[] = {"mu", "alpha1", "beta1", "alpha2", "beta2"};
constexpr const char* kPlNames[] = {"mu", "k", "c", "p"};

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

const char* to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::HPP: return "HPP";
    case ModelFamily::NHPP_PL: return "NHPP_PL";
    case ModelFamily::HAWKES_EXP: return "HAWKES_EXP";
    case ModelFamily::HAWKES_2EXP: return "HAWKES_2EXP";
    case ModelFamily::HAWKES_PL: return "HAWKES_PL";
  }
  return "?";
}

ModelFamily family_from_string(const std::string& s) {
  if (s == "HPP") return ModelFamily::HPP;
  if (s == "NHPP_PL") return ModelFamily::NHPP_PL;
  if (s == "HAWKES_EXP") return ModelFamily::HAWKES_EXP;
  if (s == "HAWKES_2EXP") return ModelFamily::HAWKES_2EXP;
  if (s == "HAWKES_PL") return ModelFamily::HAWKES_PL;
  throw std::invalid_argument("unknown model family: " + s);
}

bool is_hawkes(ModelFamily f) {
  return f == ModelFamily::HAWKES_EXP || f == ModelFamily::HAWKES_2EXP ||
         f == ModelFamily::HAWKES_PL;
}

std::size_t param_count(ModelFamily f) {
  switch (f) {
    case ModelFamily::HPP: return 1;
    case ModelFamily::NHPP_PL: return 2;
    case ModelFamily::HAWKES_EXP: return 3;
    case ModelFamily::HAWKES_2EXP: return 5;
    case ModelFamily::HAWKES_PL: return 4;
  }
  return 0;
}

std::span<const char* const> param_names(ModelFamily f) {
  switch (f) {
    case ModelFamily::HPP: return kHppNames;
    case ModelFamily::NHPP_PL: return kNhppNames;
    case ModelFamily::HAWKES_EXP: return kExpNames;
    case ModelFamily::HAWKES_2EXP: return k2ExpNames;
    case ModelFamily::HAWKES_PL: return kPlNames;
  }
  return {};
}

ParamSet::ParamSet(ModelFamily family, std::vector<double> values)
    : family_(family), values_(std::move(values)) {
  if (values_.size() != param_count(family_))
    throw std::invalid_argument(std::string("ParamSet ") + to_string(family_) +
                                ": wrong parameter count");
  for (double v : values_) {
    if (std::isnan(v)) throw std::invalid_argument("ParamSet: NaN parameter");
    if (v < 0.0) throw std::invalid_argument("ParamSet: negative parameter");
  }
  if (family_ == ModelFamily::HAWKES_PL && !(values_[3] > 1.0))
    throw std::invalid_argument("ParamSet HAWKES_PL: p must be > 1");
  if (family_ == ModelFamily::HAWKES_2EXP && values_[2] < values_[4]) {
    std::swap(values_[1], values_[3]);
    std::swap(values_[2], values_[4]);
  }
}

ParamSet ParamSet::from_named(ModelFamily family, const std::map<std::string, double>& named) {
  const auto names = param_names(family);
  std::vector<double> values;
  values.reserve(names.size());
  for (const char* name : names) {
    const auto it = named.find(name);
    if (it == named.end())
      throw std::invalid_argument(std::string("ParamSet ") + to_string(family) +
                                  ": missing parameter " + name);
    values.push_back(it->second);
  }
  if (named.size() != names.size())
    throw std::invalid_argument(std::string("ParamSet ") + to_string(family) +
                                ": unexpected extra parameters");
  return ParamSet(family, std::move(values));
}

double ParamSet::value(std::string_view name) const {
  const auto names = param_names(family_);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (name == names[i]) return values_[i];
  }
  throw std::invalid_argument(std::string("ParamSet ") + to_string(family_) +
                              ": no parameter named " + std::string(name));
}

std::map<std::string, double> ParamSet::named() const {
  std::map<std::string, double> out;
  const auto names = param_names(family_);
  for (std::size_t i = 0; i < names.size(); ++i) out[names[i]] = values_[i];
  return out;
}

namespace raw {

double intensity(ModelFamily f, std::span<const double> p, std::span<const double> history,
                 double t) {
  switch (f) {
    case ModelFamily::HPP:
      return p[0];
    case ModelFamily::NHPP_PL: {
      const double coef = p[0] * p[1];
      if (coef == 0.0) return 0.0;
      return coef * std::pow(t, p[1] - 1.0);  // +inf at t=0 when k<1
    }
    case ModelFamily::HAWKES_EXP: {
      double s = 0.0;
      for (double tj : history) s += std::exp(-p[2] * (t - tj));
      return p[0] + p[1] * p[2] * s;
    }
    case ModelFamily::HAWKES_2EXP: {
      double s1 = 0.0, s2 = 0.0;
      for (double tj : history) {
        s1 += std::exp(-p[2] * (t - tj));
        s2 += std::exp(-p[4] * (t - tj));
      }
      return p[0] + p[1] * p[2] * s1 + p[3] * p[4] * s2;
    }
    case ModelFamily::HAWKES_PL: {
      double s = 0.0;
      for (double tj : history) s += std::pow(p[2] + (t - tj), -p[3]);
      return p[0] + p[1] * s;
    }
  }
  return 0.0;
}

double cumulative(ModelFamily f, std::span<const double> p, std::span<const double> history,
                  double t) {
  switch (f) {
    case ModelFamily::HPP:
      return p[0] * t;
    case ModelFamily::NHPP_PL:
      return p[0] * std::pow(t, p[1]);
    case ModelFamily::HAWKES_EXP: {
      double s = 0.0;
      for (double tj : history) s -= std::expm1(-p[2] * (t - tj));
      return p[0] * t + p[1] * s;
    }
    case ModelFamily::HAWKES_2EXP: {
      double s1 = 0.0, s2 = 0.0;
      for (double tj : history) {
        s1 -= std::expm1(-p[2] * (t - tj));
        s2 -= std::expm1(-p[4] * (t - tj));
      }
      return p[0] * t + p[1] * s1 + p[3] * s2;
    }
    case ModelFamily::HAWKES_PL: {
      const double one_m_p = 1.0 - p[3];
      const double c_pow = std::pow(p[2], one_m_p);
      double s = 0.0;
      for (double tj : history) s += c_pow - std::pow(p[2] + (t - tj), one_m_p);
      return p[0] * t + p[1] / (p[3] - 1.0) * s;
    }
  }
  return 0.0;
}

double cumulative_increment(ModelFamily f, std::span<const double> p,
                            std::span<const double> history, double t0, double dt) {
  const double t1 = t0 + dt;
  switch (f) {
    case ModelFamily::HPP:
      return p[0] * dt;
    case ModelFamily::NHPP_PL:
      return p[0] * (std::pow(t1, p[1]) - std::pow(t0, p[1]));
    case ModelFamily::HAWKES_EXP: {
      double s = 0.0;
      for (double tj : history) s += std::exp(-p[2] * (t0 - tj)) - std::exp(-p[2] * (t1 - tj));
      return p[0] * dt + p[1] * s;
    }
    case ModelFamily::HAWKES_2EXP: {
      double s1 = 0.0, s2 = 0.0;
      for (double tj : history) {
        s1 += std::exp(-p[2] * (t0 - tj)) - std::exp(-p[2] * (t1 - tj));
        s2 += std::exp(-p[4] * (t0 - tj)) - std::exp(-p[4] * (t1 - tj));
      }
      return p[0] * dt + p[1] * s1 + p[3] * s2;
    }
    case ModelFamily::HAWKES_PL: {
      const double one_m_p = 1.0 - p[3];
      double s = 0.0;
      for (double tj : history)
        s += std::pow(p[2] + (t0 - tj), one_m_p) - std::pow(p[2] + (t1 - tj), one_m_p);
      return p[0] * dt + p[1] / (p[3] - 1.0) * s;
    }
  }
  return 0.0;
}

namespace {

double loglik_hpp(std::span<const double> p, const EventSequence& seq, std::span<double> g) {
  const double mu = p[0];
  const double T = seq.duration();
  const auto J = static_cast<double>(seq.count());
  const double ll = J * std::log(mu) - mu * T;
  if (!g.empty()) g[0] += J / mu - T;
  return ll;
}

double loglik_nhpp(std::span<const double> p, const EventSequence& seq, std::span<double> g) {
  const double alpha = p[0], k = p[1];
  const double T = seq.duration();
  // Onsets at exactly t = 0 sit on the divergent window edge and are
  // excluded from the event sum.
  double sum_log_t = 0.0;
  double J = 0.0;
  for (double tj : seq.onsets()) {
    if (tj == 0.0) continue;
    sum_log_t += std::log(tj);
    J += 1.0;
  }
  const double Tk = std::pow(T, k);
  const double ll = J * (std::log(alpha) + std::log(k)) + (k - 1.0) * sum_log_t - alpha * Tk;
  if (!g.empty()) {
    g[0] += J / alpha - Tk;
    g[1] += J / k + sum_log_t - alpha * Tk * std::log(T);
  }
  return ll;
}

double loglik_hawkes_exp(std::span<const double> p, const EventSequence& seq,
                         std::span<double> g) {
  const double mu = p[0], alpha = p[1], beta = p[2];
  const double T = seq.duration();
  const auto onsets = seq.onsets();
  const bool want_grad = !g.empty();

  double ll = 0.0;
  double A = 0.0, dA = 0.0;  // A_j = sum_{i<j} e^{-beta(t_j-t_i)}, dA = dA/dbeta
  double comp = 0.0, comp_du = 0.0;
  double g_mu = 0.0, g_alpha = 0.0, g_beta = 0.0;
  double prev = 0.0;
  for (std::size_t j = 0; j < onsets.size(); ++j) {
    const double tj = onsets[j];
    if (j > 0) {
      const double e = std::exp(-beta * (tj - prev));
      dA = e * (dA - (tj - prev) * (1.0 + A));
      A = e * (1.0 + A);
    }
    prev = tj;
    const double lam = mu + alpha * beta * A;
    ll += std::log(lam);
    if (want_grad) {
      const double inv = 1.0 / lam;
      g_mu += inv;
      g_alpha += beta * A * inv;
      g_beta += alpha * (A + beta * dA) * inv;
    }
    const double u = T - tj;
    const double eu = std::exp(-beta * u);
    comp -= std::expm1(-beta * u);
    comp_du += u * eu;
  }
  ll -= mu * T + alpha * comp;
  if (want_grad) {
    g[0] += g_mu - T;
    g[1] += g_alpha - comp;
    g[2] += g_beta - alpha * comp_du;
  }
  return ll;
}

double loglik_hawkes_2exp(std::span<const double> p, const EventSequence& seq,
                          std::span<double> g) {
  const double mu = p[0], a1 = p[1], b1 = p[2], a2 = p[3], b2 = p[4];
  const double T = seq.duration();
  const auto onsets = seq.onsets();
  const bool want_grad = !g.empty();

  double ll = 0.0;
  double A1 = 0.0, dA1 = 0.0, A2 = 0.0, dA2 = 0.0;
  double comp1 = 0.0, comp1_du = 0.0, comp2 = 0.0, comp2_du = 0.0;
  double g_mu = 0.0, g_a1 = 0.0, g_b1 = 0.0, g_a2 = 0.0, g_b2 = 0.0;
  double prev = 0.0;
  for (std::size_t j = 0; j < onsets.size(); ++j) {
    const double tj = onsets[j];
    if (j > 0) {
      const double d = tj - prev;
      const double e1 = std::exp(-b1 * d);
      dA1 = e1 * (dA1 - d * (1.0 + A1));
      A1 = e1 * (1.0 + A1);
      const double e2 = std::exp(-b2 * d);
      dA2 = e2 * (dA2 - d * (1.0 + A2));
      A2 = e2 * (1.0 + A2);
    }
    prev = tj;
    const double lam = mu + a1 * b1 * A1 + a2 * b2 * A2;
    ll += std::log(lam);
    if (want_grad) {
      const double inv = 1.0 / lam;
      g_mu += inv;
      g_a1 += b1 * A1 * inv;
      g_b1 += a1 * (A1 + b1 * dA1) * inv;
      g_a2 += b2 * A2 * inv;
      g_b2 += a2 * (A2 + b2 * dA2) * inv;
    }
    const double u = T - tj;
    comp1 -= std::expm1(-b1 * u);
    comp1_du += u * std::exp(-b1 * u);
    comp2 -= std::expm1(-b2 * u);
    comp2_du += u * std::exp(-b2 * u);
  }
  ll -= mu * T + a1 * comp1 + a2 * comp2;
  if (want_grad) {
    g[0] += g_mu - T;
    g[1] += g_a1 - comp1;
    g[2] += g_b1 - a1 * comp1_du;
    g[3] += g_a2 - comp2;
    g[4] += g_b2 - a2 * comp2_du;
  }
  return ll;
}

double loglik_hawkes_pl(std::span<const double> p, const EventSequence& seq,
                        std::span<double> g) {
  const double mu = p[0], k = p[1], c = p[2], pw = p[3];
  const double T = seq.duration();
  const auto onsets = seq.onsets();
  const bool want_grad = !g.empty();

  double ll = 0.0;
  double g_mu = 0.0, g_k = 0.0, g_c = 0.0, g_p = 0.0;
  for (std::size_t j = 0; j < onsets.size(); ++j) {
    double s0 = 0.0, s1 = 0.0, sl = 0.0;
    for (std::size_t i = 0; i < j; ++i) {
      const double w = c + (onsets[j] - onsets[i]);
      const double lw = std::log(w);
      const double wp = std::exp(-pw * lw);  // w^{-p}
      s0 += wp;
      if (want_grad) {
        s1 += wp / w;
        sl += wp * lw;
      }
    }
    const double lam = mu + k * s0;
    ll += std::log(lam);
    if (want_grad) {
      const double inv = 1.0 / lam;
      g_mu += inv;
      g_k += s0 * inv;
      g_c -= k * pw * s1 * inv;
      g_p -= k * sl * inv;
    }
  }

  const double one_m_p = 1.0 - pw;
  const double inv_pm1 = 1.0 / (pw - 1.0);
  const double lc = std::log(c);
  const double c_1mp = std::exp(one_m_p * lc);  // c^{1-p}
  const double c_mp = c_1mp / c;                // c^{-p}
  double G = 0.0, G_c = 0.0, G_p = 0.0;
  for (double tj : onsets) {
    const double w = c + (T - tj);
    const double lw = std::log(w);
    const double w_1mp = std::exp(one_m_p * lw);
    G += c_1mp - w_1mp;
    if (want_grad) {
      G_c += c_mp - w_1mp / w;
      G_p += w_1mp * lw - c_1mp * lc;
    }
  }
  ll -= mu * T + k * inv_pm1 * G;
  if (want_grad) {
    g[0] += g_mu - T;
    g[1] += g_k - inv_pm1 * G;
    g[2] += g_c + k * G_c;  // dLambda/dc = -k*G_c
    g[3] += g_p - k * (inv_pm1 * G_p - inv_pm1 * inv_pm1 * G);
  }
  return ll;
}

}  // namespace

double loglik(ModelFamily f, std::span<const double> p, const EventSequence& seq,
              std::span<double> grad) {
  switch (f) {
    case ModelFamily::HPP: return loglik_hpp(p, seq, grad);
    case ModelFamily::NHPP_PL: return loglik_nhpp(p, seq, grad);
    case ModelFamily::HAWKES_EXP: return loglik_hawkes_exp(p, seq, grad);
    case ModelFamily::HAWKES_2EXP: return loglik_hawkes_2exp(p, seq, grad);
    case ModelFamily::HAWKES_PL: return loglik_hawkes_pl(p, seq, grad);
  }
  return -kInf;
}

}  // namespace raw

namespace {

void check_time(const EventSequence& seq, double t) {
  if (!(t >= 0.0) || t > seq.duration())
    throw std::out_of_range("query time outside [0, duration]");
}

void check_grad_interior(const ParamSet& params) {
  const auto p = params.values();
  bool ok = true;
  switch (params.family()) {
    case ModelFamily::HPP: ok = p[0] > 0.0; break;
    case ModelFamily::NHPP_PL: ok = p[0] > 0.0 && p[1] > 0.0; break;
    case ModelFamily::HAWKES_EXP: ok = p[0] > 0.0 && p[2] > 0.0; break;
    case ModelFamily::HAWKES_2EXP: ok = p[0] > 0.0 && p[2] > 0.0 && p[4] > 0.0; break;
    case ModelFamily::HAWKES_PL: ok = p[0] > 0.0 && p[2] > 0.0 && p[3] > 1.0; break;
  }
  if (!ok)
    throw std::domain_error(std::string("grad_log_likelihood ") + to_string(params.family()) +
                            ": parameter on the feasibility boundary");
}

}  // namespace

double intensity(const ParamSet& params, const EventSequence& seq, double t) {
  check_time(seq, t);
  return raw::intensity(params.family(), params.values(), seq.history_before(t), t);
}

double intensity_post(const ParamSet& params, const EventSequence& seq, double t) {
  check_time(seq, t);
  return raw::intensity(params.family(), params.values(), seq.history_through(t), t);
}

double cumulative_intensity(const ParamSet& params, const EventSequence& seq, double t) {
  check_time(seq, t);
  return raw::cumulative(params.family(), params.values(), seq.history_before(t), t);
}

double log_likelihood(const ParamSet& params, const EventSequence& seq) {
  return raw::loglik(params.family(), params.values(), seq, {});
}

double log_likelihood(const ParamSet& params, const Dataset& ds) {
  double ll = 0.0;
  for (const auto& seq : ds.sequences) ll += raw::loglik(params.family(), params.values(), seq, {});
  return ll;
}

std::vector<double> grad_log_likelihood(const ParamSet& params, const EventSequence& seq) {
  check_grad_interior(params);
  std::vector<double> grad(param_count(params.family()), 0.0);
  raw::loglik(params.family(), params.values(), seq, grad);
  return grad;
}

std::vector<double> grad_log_likelihood(const ParamSet& params, const Dataset& ds) {
  check_grad_interior(params);
  std::vector<double> grad(param_count(params.family()), 0.0);
  for (const auto& seq : ds.sequences) raw::loglik(params.family(), params.values(), seq, grad);
  return grad;
}

double branching_factor(const ParamSet& params) {
  const auto p = params.values();
  switch (params.family()) {
    case ModelFamily::HAWKES_EXP: return p[1];
    case ModelFamily::HAWKES_2EXP: return p[1] + p[3];
    case ModelFamily::HAWKES_PL: return p[1] * std::pow(p[2], 1.0 - p[3]) / (p[3] - 1.0);
    default:
      throw std::domain_error(std::string("branching_factor undefined for ") +
                              to_string(params.family()));
  }
}

Criticality criticality(double branching) {
  if (branching < 1.0) return Criticality::Subcritical;
  if (branching > 1.0) return Criticality::Supercritical;
  return Criticality::Critical;
}

const char* to_string(Criticality c) {
  switch (c) {
    case Criticality::Subcritical: return "subcritical";
    case Criticality::Critical: return "critical";
    case Criticality::Supercritical: return "supercritical";
  }
  return "?";
}

}  // namespace tpp
