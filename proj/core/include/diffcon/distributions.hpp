#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "diffcon/rng.hpp"

namespace diffcon {

// Negative binomial parametrised by mean and scale:
//   variance = mean + mean^2 / scale  (gamma-Poisson mixture).
struct NegBinomMeanScale {
  double mean;
  double scale;

  NegBinomMeanScale(double mean, double scale);

  double variance() const { return mean + mean * mean / scale; }
};

// Discrete delay kernel on u = 1, 2, ...: a negative-binomial pmf shifted
// right by one day so the kernel mean equals delay_mean and same-day
// excitation is impossible.
struct DecayKernel {
  double delay_mean;  // expected delay in days, > 1
  double scale;       // > 0

  DecayKernel(double delay_mean, double scale);

  // The unshifted negative binomial on {0, 1, ...}.
  NegBinomMeanScale underlying() const { return {delay_mean - 1.0, scale}; }
};

// Truncation of the delay kernel: smallest horizon with cumulative mass
// >= 1 - kDecayMassTol, capped at kDecayHorizonCap days.
inline constexpr double kDecayMassTol = 1e-9;
inline constexpr int kDecayHorizonCap = 365;

double poisson_logpmf(std::int64_t y, double rate);
double negbinom_logpmf(std::int64_t y, const NegBinomMeanScale& dist);
double gamma_logpdf(double x, double shape, double rate);

// Gamma draw with expectation shape / rate.
double gamma_sample(double shape, double rate, Rng& rng);
std::int64_t poisson_sample(double rate, Rng& rng);
std::int64_t binomial_sample(std::int64_t n, double p, Rng& rng);
std::int64_t negbinom_sample(const NegBinomMeanScale& dist, Rng& rng);

// g(u; phi) for integer delay u >= 1.
double decay_pmf(std::int64_t u, const DecayKernel& kernel);
double decay_expected_delay(const DecayKernel& kernel);
// P(delay > k) = 1 - sum_{u=1..k} g(u).
double decay_tail_prob(std::int64_t k, const DecayKernel& kernel);
int decay_horizon(const DecayKernel& kernel);
// g(1..U) for the computed horizon U.
std::vector<double> decay_weights(const DecayKernel& kernel);

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

// Univariate slice sampler: stepping-out then shrinkage (Neal 2003).
// Returns a draw leaving the target invariant; the result stays in bounds.
// A zero-width bounds interval returns `current` unchanged.
double slice_sample(const std::function<double(double)>& log_density,
                    double current, double width, Interval bounds, Rng& rng);

// One hit-and-run move: pick a uniform direction on the unit sphere, then
// slice sample the scalar coordinate along that line.
Eigen::VectorXd hit_and_run_step(
    const std::function<double(const Eigen::VectorXd&)>& log_density,
    const Eigen::VectorXd& current, Rng& rng, double width = 1.0);

}  // namespace diffcon
