#include "diffcon/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diffcon/errors.hpp"

namespace diffcon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// lgamma(k) for integer k; table-backed for the small counts that dominate
// daily event data.
double lgamma_int(std::int64_t k) {
  static constexpr int kCacheSize = 1024;
  static const std::vector<double> table = [] {
    std::vector<double> t(kCacheSize);
    for (int i = 1; i < kCacheSize; ++i) t[static_cast<std::size_t>(i)] = std::lgamma(static_cast<double>(i));
    return t;
  }();
  if (k > 0 && k < kCacheSize) return table[static_cast<std::size_t>(k)];
  return std::lgamma(static_cast<double>(k));
}

}  // namespace

NegBinomMeanScale::NegBinomMeanScale(double mean_in, double scale_in)
    : mean(mean_in), scale(scale_in) {
  if (!(mean > 0.0) || !std::isfinite(mean))
    throw std::domain_error("NegBinomMeanScale: mean must be positive and finite");
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw std::domain_error("NegBinomMeanScale: scale must be positive and finite");
}

DecayKernel::DecayKernel(double delay_mean_in, double scale_in)
    : delay_mean(delay_mean_in), scale(scale_in) {
  if (!(delay_mean > 1.0) || !std::isfinite(delay_mean))
    throw std::domain_error("DecayKernel: delay_mean must exceed 1");
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw std::domain_error("DecayKernel: scale must be positive and finite");
}

double poisson_logpmf(std::int64_t y, double rate) {
  if (y < 0) throw std::domain_error("poisson_logpmf: y must be nonnegative");
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw std::domain_error("poisson_logpmf: rate must be finite and nonnegative");
  if (rate == 0.0) return y == 0 ? 0.0 : kNegInf;
  return static_cast<double>(y) * std::log(rate) - rate - lgamma_int(y + 1);
}

double negbinom_logpmf(std::int64_t y, const NegBinomMeanScale& dist) {
  if (y < 0) throw std::domain_error("negbinom_logpmf: y must be nonnegative");
  const double m = dist.mean;
  const double s = dist.scale;
  const double yd = static_cast<double>(y);
  return std::lgamma(yd + s) - std::lgamma(s) - lgamma_int(y + 1) +
         s * std::log(s / (s + m)) + yd * std::log(m / (s + m));
}

double gamma_logpdf(double x, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::domain_error("gamma_logpdf: shape and rate must be positive");
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double gamma_sample(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape))
    throw std::domain_error("gamma_sample: shape must be positive and finite");
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw std::domain_error("gamma_sample: rate must be positive and finite");
  if (shape < 1.0) {
    // Boost to shape+1 and scale back (Marsaglia & Tsang).
    const double u = rng.uniform_pos();
    const double boosted = gamma_sample(shape + 1.0, rate, rng);
    return std::max(boosted * std::pow(u, 1.0 / shape), 1e-300);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / (3.0 * std::sqrt(d));
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return std::max(d * v / rate, 1e-300);
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return std::max(d * v / rate, 1e-300);
  }
}

std::int64_t poisson_sample(double rate, Rng& rng) {
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw std::domain_error("poisson_sample: rate must be finite and nonnegative");
  if (rate == 0.0) return 0;
  if (rate < 30.0) {
    const double limit = std::exp(-rate);
    double prod = rng.uniform_pos();
    std::int64_t k = 0;
    while (prod > limit) {
      prod *= rng.uniform_pos();
      ++k;
    }
    return k;
  }
  // Hoermann's PTRS transformed rejection.
  const double b = 0.931 + 2.53 * std::sqrt(rate);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_rate = std::log(rate);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform_pos();
    const double us = 0.5 - std::abs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + rate + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        kf * log_rate - rate - std::lgamma(kf + 1.0))
      return static_cast<std::int64_t>(kf);
  }
}

std::int64_t binomial_sample(std::int64_t n, double p, Rng& rng) {
  if (n < 0) throw std::domain_error("binomial_sample: n must be nonnegative");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::domain_error("binomial_sample: p must lie in [0, 1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - binomial_sample(n, 1.0 - p, rng);
  // Beta order-statistic split keeps the inversion loop bounded for large n.
  if (static_cast<double>(n) * -std::log1p(-p) > 700.0) {
    const std::int64_t i = n / 2;
    const double a = gamma_sample(static_cast<double>(i), 1.0, rng);
    const double b = gamma_sample(static_cast<double>(n - i + 1), 1.0, rng);
    const double v = a / (a + b);  // Beta(i, n - i + 1)
    if (p < v) return binomial_sample(i - 1, p / v, rng);
    return i + binomial_sample(n - i, (p - v) / (1.0 - v), rng);
  }
  // BINV inversion.
  const double q = 1.0 - p;
  double f = std::exp(static_cast<double>(n) * std::log1p(-p));
  double u = rng.uniform();
  const double odds = p / q;
  std::int64_t x = 0;
  while (u > f) {
    u -= f;
    ++x;
    if (x > n) return n;  // float roundoff guard
    f *= odds * static_cast<double>(n - x + 1) / static_cast<double>(x);
  }
  return x;
}

std::int64_t negbinom_sample(const NegBinomMeanScale& dist, Rng& rng) {
  const double rate = dist.scale / dist.mean;
  // Scale far above the mean collapses the mixture onto a Poisson.
  if (!std::isfinite(rate)) return poisson_sample(dist.mean, rng);
  const double lambda = gamma_sample(dist.scale, rate, rng);
  return poisson_sample(lambda, rng);
}

double decay_pmf(std::int64_t u, const DecayKernel& kernel) {
  if (u < 1) throw std::domain_error("decay_pmf: delay must be at least 1 day");
  return std::exp(negbinom_logpmf(u - 1, kernel.underlying()));
}

double decay_expected_delay(const DecayKernel& kernel) { return kernel.delay_mean; }

double decay_tail_prob(std::int64_t k, const DecayKernel& kernel) {
  if (k < 1) throw std::domain_error("decay_tail_prob: k must be at least 1");
  const NegBinomMeanScale nb = kernel.underlying();
  long double cdf = 0.0L;
  for (std::int64_t u = 1; u <= k; ++u) {
    const double term = std::exp(negbinom_logpmf(u - 1, nb));
    cdf += term;
    // Terms past the mode shrink geometrically; once negligible the rest of
    // the partial sum cannot move the result at 1e-12 resolution.
    if (term < 1e-20 && static_cast<double>(u) > 2.0 * kernel.delay_mean + 10.0) break;
  }
  const double tail = static_cast<double>(1.0L - cdf);
  return std::clamp(tail, 0.0, 1.0);
}

int decay_horizon(const DecayKernel& kernel) {
  const NegBinomMeanScale nb = kernel.underlying();
  long double cdf = 0.0L;
  for (int u = 1; u <= kDecayHorizonCap; ++u) {
    cdf += std::exp(negbinom_logpmf(u - 1, nb));
    if (cdf >= 1.0L - static_cast<long double>(kDecayMassTol)) return u;
  }
  return kDecayHorizonCap;
}

std::vector<double> decay_weights(const DecayKernel& kernel) {
  const int horizon = decay_horizon(kernel);
  const NegBinomMeanScale nb = kernel.underlying();
  std::vector<double> g(static_cast<std::size_t>(horizon));
  for (int u = 1; u <= horizon; ++u)
    g[static_cast<std::size_t>(u - 1)] = std::exp(negbinom_logpmf(u - 1, nb));
  return g;
}

double slice_sample(const std::function<double(double)>& log_density,
                    double current, double width, Interval bounds, Rng& rng) {
  if (!(width > 0.0)) throw std::domain_error("slice_sample: width must be positive");
  if (bounds.hi < bounds.lo)
    throw std::domain_error("slice_sample: empty bounds interval");
  if (current < bounds.lo || current > bounds.hi)
    throw std::domain_error("slice_sample: current point outside bounds");
  if (bounds.hi == bounds.lo) return current;

  const double f0 = log_density(current);
  if (!std::isfinite(f0))
    throw NumericError("slice_sample: log-density not finite at current point");
  const double level = f0 - rng.exponential();

  // Stepping out.
  const int max_steps = 50;
  double lo = current - width * rng.uniform();
  double hi = lo + width;
  int steps_lo = static_cast<int>(std::floor(max_steps * rng.uniform()));
  int steps_hi = max_steps - 1 - steps_lo;
  while (steps_lo-- > 0 && lo > bounds.lo && log_density(lo) > level) lo -= width;
  while (steps_hi-- > 0 && hi < bounds.hi && log_density(hi) > level) hi += width;
  lo = std::max(lo, bounds.lo);
  hi = std::min(hi, bounds.hi);

  // Shrinkage.
  for (;;) {
    const double x = lo + (hi - lo) * rng.uniform();
    if (log_density(x) >= level) return x;
    if (x < current)
      lo = x;
    else
      hi = x;
    if (hi - lo < 1e-14 * (std::abs(current) + 1.0)) return current;
  }
}

Eigen::VectorXd hit_and_run_step(
    const std::function<double(const Eigen::VectorXd&)>& log_density,
    const Eigen::VectorXd& current, Rng& rng, double width) {
  const Eigen::Index n = current.size();
  if (n == 0) throw std::domain_error("hit_and_run_step: empty state vector");
  if (!std::isfinite(log_density(current)))
    throw NumericError("hit_and_run_step: log-density not finite at current point");

  Eigen::VectorXd dir(n);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < n; ++i) dir[i] = rng.normal();
    norm = dir.norm();
  } while (norm == 0.0);
  dir /= norm;

  const auto line = [&](double t) { return log_density(current + t * dir); };
  const double t = slice_sample(line, 0.0, width, Interval{}, rng);
  return current + t * dir;
}

}  // namespace diffcon
