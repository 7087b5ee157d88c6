#include "diffcon/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "diffcon/errors.hpp"

namespace diffcon {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kExpOverflow = 700.0;
}  // namespace

void EventSeries::validate() const {
  if (counts.size() != fatalities.size())
    throw ConfigError("EventSeries: counts and fatalities must have equal length");
  for (std::size_t t = 0; t < counts.size(); ++t) {
    if (counts[t] < 0 || fatalities[t] < 0)
      throw ConfigError("EventSeries: negative entry at day " + std::to_string(t));
    if (counts[t] == 0 && fatalities[t] != 0)
      throw ConfigError("EventSeries: fatalities without events at day " + std::to_string(t));
  }
}

void ModelParams::validate() const {
  if (!(sigma2 > 0.0)) throw ConfigError("ModelParams: sigma2 must be positive");
  if (!(rho > 0.0)) throw ConfigError("ModelParams: rho must be positive");
  if (!(gamma > 0.0)) throw ConfigError("ModelParams: gamma must be positive");
  if (!(kernel.delay_mean > 1.0) || !(kernel.scale > 0.0))
    throw ConfigError("ModelParams: invalid decay kernel");
}

namespace {

Eigen::VectorXd exp_linear_predictor(const Eigen::VectorXd& coef, const DesignMatrix& design,
                                     const char* what) {
  if (coef.size() != design.cols())
    throw ConfigError(std::string(what) + ": coefficient length " + std::to_string(coef.size()) +
                      " does not match basis size " + std::to_string(design.cols()));
  Eigen::VectorXd lin = design.values * coef;
  for (Eigen::Index t = 0; t < lin.size(); ++t) {
    if (lin[t] > kExpOverflow)
      throw NumericError(std::string(what) + ": exp overflow at day " + std::to_string(t));
    lin[t] = std::exp(lin[t]);
  }
  return lin;
}

}  // namespace

Eigen::VectorXd diffusion_rate(const Eigen::VectorXd& beta, const DesignMatrix& x) {
  return exp_linear_predictor(beta, x, "diffusion_rate");
}

Eigen::VectorXd excitation_coeffs(const Eigen::VectorXd& eta, const DesignMatrix& w) {
  return exp_linear_predictor(eta, w, "excitation_coeffs");
}

Eigen::VectorXd contagion_mean_weights(std::span<const std::int64_t> counts,
                                       const Eigen::VectorXd& delta,
                                       std::span<const double> weights) {
  const std::int64_t t_max = static_cast<std::int64_t>(counts.size());
  if (delta.size() != t_max)
    throw ConfigError("contagion_mean: delta length does not match series length");
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(t_max);
  const std::int64_t horizon = static_cast<std::int64_t>(weights.size());
  for (std::int64_t s = 0; s < t_max; ++s) {
    if (counts[static_cast<std::size_t>(s)] == 0) continue;
    const double w = delta[s] * static_cast<double>(counts[static_cast<std::size_t>(s)]);
    const std::int64_t u_max = std::min(horizon, t_max - 1 - s);
    for (std::int64_t u = 1; u <= u_max; ++u)
      mu[s + u] += w * weights[static_cast<std::size_t>(u - 1)];
  }
  return mu;
}

Eigen::VectorXd contagion_mean(const EventSeries& series, const Eigen::VectorXd& delta,
                               const DecayKernel& kernel) {
  const std::vector<double> g = decay_weights(kernel);
  return contagion_mean_weights(series.counts, delta, g);
}

Eigen::VectorXd conditional_intensity(const ModelParams& params, const EventSeries& series,
                                      const DesignMatrix& x, const DesignMatrix& w) {
  const Eigen::VectorXd lam_d = diffusion_rate(params.beta, x);
  const Eigen::VectorXd delta = excitation_coeffs(params.eta, w);
  const Eigen::VectorXd mu_c = contagion_mean(series, delta, params.kernel);
  return lam_d + mu_c;
}

double loglik_diffusion(std::span<const std::int64_t> yd, const Eigen::VectorXd& lam_d) {
  if (static_cast<Eigen::Index>(yd.size()) != lam_d.size())
    throw ConfigError("loglik_diffusion: length mismatch");
  double out = 0.0;
  for (Eigen::Index t = 0; t < lam_d.size(); ++t)
    out += poisson_logpmf(yd[static_cast<std::size_t>(t)], lam_d[t]);
  return out;
}

double loglik_contagion(std::span<const std::int64_t> yc, const Eigen::VectorXd& mu_c,
                        double sigma2) {
  if (static_cast<Eigen::Index>(yc.size()) != mu_c.size())
    throw ConfigError("loglik_contagion: length mismatch");
  if (!(sigma2 > 0.0)) throw std::domain_error("loglik_contagion: sigma2 must be positive");
  const double s = sigma2;
  const double lgamma_s = std::lgamma(s);
  double out = 0.0;
  for (Eigen::Index t = 0; t < mu_c.size(); ++t) {
    const double m = mu_c[t];
    const std::int64_t y = yc[static_cast<std::size_t>(t)];
    if (m == 0.0) {
      if (y != 0) return kNegInf;
      continue;
    }
    const double yd = static_cast<double>(y);
    out += std::lgamma(yd + s) - lgamma_s - std::lgamma(yd + 1.0) +
           s * std::log(s / (s + m)) + yd * std::log(m / (s + m));
  }
  return out;
}

namespace detail {

double diffusion_loglik_rate_part(std::span<const std::int64_t> yd,
                                  const Eigen::VectorXd& log_lam) {
  double out = 0.0;
  for (Eigen::Index t = 0; t < log_lam.size(); ++t) {
    const double lx = log_lam[t];
    if (lx > kExpOverflow) return kNegInf;
    out += static_cast<double>(yd[static_cast<std::size_t>(t)]) * lx - std::exp(lx);
  }
  return out;
}

double contagion_loglik_mean_part(std::span<const std::int64_t> yc, const Eigen::VectorXd& mu,
                                  double sigma2) {
  const double s = sigma2;
  double out = 0.0;
  for (Eigen::Index t = 0; t < mu.size(); ++t) {
    const double m = mu[t];
    const std::int64_t y = yc[static_cast<std::size_t>(t)];
    if (m == 0.0) {
      if (y != 0) return kNegInf;
      continue;
    }
    out += s * std::log(s / (s + m));
    if (y != 0) out += static_cast<double>(y) * std::log(m / (s + m));
  }
  return out;
}

}  // namespace detail

}  // namespace diffcon
