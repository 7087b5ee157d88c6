#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "diffcon/basis.hpp"
#include "diffcon/distributions.hpp"

namespace diffcon {

// Daily grid of event counts and same-day fatality totals.
struct EventSeries {
  std::chrono::sys_days start{};
  std::vector<std::int64_t> counts;
  std::vector<std::int64_t> fatalities;

  int days() const { return static_cast<int>(counts.size()); }
  std::chrono::sys_days date(int t) const { return start + std::chrono::days{t}; }

  void validate() const;
};

// Full parameter vector: diffusion spline coefficients, excitation spline
// coefficients, delay kernel, contagion scale, and the two smoothing
// hyperparameters.
struct ModelParams {
  Eigen::VectorXd beta;
  Eigen::VectorXd eta;
  DecayKernel kernel{2.0, 1.0};
  double sigma2 = 1.0;
  double rho = 1.0;
  double gamma = 1.0;

  void validate() const;
};

// Diffusion rate exp(x_t beta) per day; throws NumericError (with the day
// index) if the linear predictor overflows exp.
Eigen::VectorXd diffusion_rate(const Eigen::VectorXd& beta, const DesignMatrix& x);

// Excitation coefficients delta_s = exp(w_s eta) per day.
Eigen::VectorXd excitation_coeffs(const Eigen::VectorXd& eta, const DesignMatrix& w);

// Contagion mean mu_t = sum_{s<t} delta_s Y_s g(t - s), kernel truncated at
// its horizon; mu_0 = 0 (cold start: no pre-sample history).
Eigen::VectorXd contagion_mean(const EventSeries& series, const Eigen::VectorXd& delta,
                               const DecayKernel& kernel);

// Same sum with explicit kernel weights g(1..U); the building block the
// kernel version delegates to.
Eigen::VectorXd contagion_mean_weights(std::span<const std::int64_t> counts,
                                       const Eigen::VectorXd& delta,
                                       std::span<const double> weights);

// lambda_t = lambda_t^d + mu_t^c.
Eigen::VectorXd conditional_intensity(const ModelParams& params, const EventSeries& series,
                                      const DesignMatrix& x, const DesignMatrix& w);

// Poisson log likelihood of the diffusion counts.
double loglik_diffusion(std::span<const std::int64_t> yd, const Eigen::VectorXd& lam_d);

// Negative-binomial log likelihood of the contagion counts. Days with
// mu_t = 0 contribute 0 when yc_t = 0 and -infinity otherwise.
double loglik_contagion(std::span<const std::int64_t> yc, const Eigen::VectorXd& mu_c,
                        double sigma2);

namespace detail {
// Likelihood kernels with the count-only lgamma terms dropped; equal to the
// full log likelihoods up to additive constants in the counts. Used where
// only differences or shapes in the parameters matter.
double diffusion_loglik_rate_part(std::span<const std::int64_t> yd, const Eigen::VectorXd& log_lam);
double contagion_loglik_mean_part(std::span<const std::int64_t> yc, const Eigen::VectorXd& mu,
                                  double sigma2);
}  // namespace detail

}  // namespace diffcon
