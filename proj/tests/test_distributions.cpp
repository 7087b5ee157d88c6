#include <doctest.h>

#include <cmath>
#include <vector>

#include "diffcon/distributions.hpp"
#include "diffcon/errors.hpp"
#include "support/stats.hpp"

using namespace diffcon;

TEST_SUITE_BEGIN("distributions");

TEST_CASE("poisson log pmf") {
  CHECK(poisson_logpmf(0, 1.0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(poisson_logpmf(0, 0.0) == 0.0);
  CHECK(std::isinf(poisson_logpmf(2, 0.0)));
  // ln(2^3 e^-2 / 3!)
  CHECK(poisson_logpmf(3, 2.0) == doctest::Approx(-1.7123179275482193).epsilon(1e-13));
  CHECK_THROWS_AS(poisson_logpmf(1, -0.5), std::domain_error);
  CHECK_THROWS_AS(poisson_logpmf(-1, 1.0), std::domain_error);
  CHECK(std::isfinite(poisson_logpmf(1000000, 3.0)));
}

TEST_CASE("negative binomial mean/scale pmf") {
  CHECK(negbinom_logpmf(0, {1.0, 1.0}) == doctest::Approx(std::log(0.5)).epsilon(1e-14));
  // Poisson limit: scale -> infinity gives P(0) -> exp(-mean).
  CHECK(negbinom_logpmf(0, {2.0, 1e8}) == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(std::isfinite(negbinom_logpmf(1000000, {2.0, 3.0})));
  CHECK_THROWS_AS(NegBinomMeanScale(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(NegBinomMeanScale(1.0, -1.0), std::domain_error);

  SUBCASE("variance identity") {
    const NegBinomMeanScale d{2.0, 3.0};
    CHECK(d.variance() == doctest::Approx(2.0 + 4.0 / 3.0));
  }

  SUBCASE("pmf mass reaches one") {
    for (auto [m, s] : {std::pair{0.5, 1.0}, {2.0, 3.0}, {10.0, 0.5}, {40.0, 8.0}}) {
      const NegBinomMeanScale d{m, s};
      const std::int64_t y_max =
          static_cast<std::int64_t>(m + 20.0 * std::sqrt(d.variance())) + 1;
      long double mass = 0.0L;
      for (std::int64_t y = 0; y <= y_max; ++y) mass += std::exp(negbinom_logpmf(y, d));
      CHECK(static_cast<double>(mass) > 1.0 - 1e-6);
    }
  }
}

TEST_CASE("gamma-Poisson mixture reproduces the negative binomial") {
  // Monte-Carlo oracle for the marginalization identity: lambda ~ Ga(shape =
  // scale, scale = mean/scale), y | lambda ~ Pois(lambda).
  const double m = 2.0, s = 3.0;
  Rng rng(1234);
  const int n = 1'000'000;
  std::vector<std::int64_t> freq(11, 0);
  for (int i = 0; i < n; ++i) {
    const double lambda = gamma_sample(s, s / m, rng);
    const std::int64_t y = poisson_sample(lambda, rng);
    if (y <= 10) ++freq[static_cast<std::size_t>(y)];
  }
  for (std::int64_t y = 0; y <= 10; ++y) {
    const double p = std::exp(negbinom_logpmf(y, {m, s}));
    const double se = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(static_cast<double>(freq[static_cast<std::size_t>(y)]) / n - p) < 3.0 * se + 1e-9);
  }
}

TEST_CASE("gamma sampler moments") {
  Rng rng(99);
  SUBCASE("unit exponential mean") {
    std::vector<double> xs(100000);
    for (double& x : xs) x = gamma_sample(1.0, 1.0, rng);
    CHECK(teststat::mean(xs) == doctest::Approx(1.0).epsilon(0.01));
  }
  SUBCASE("mean-parametrised contagion draw") {
    // shape sigma2, rate sigma2/mu gives expectation mu.
    const double sigma2 = 2.5, mu = 4.0;
    std::vector<double> xs(100000);
    for (double& x : xs) x = gamma_sample(sigma2, sigma2 / mu, rng);
    CHECK(teststat::mean(xs) == doctest::Approx(mu).epsilon(0.01));
  }
  SUBCASE("variance shape/rate^2") {
    std::vector<double> xs(100000);
    for (double& x : xs) x = gamma_sample(5.0, 2.0, rng);
    CHECK(teststat::variance(xs) == doctest::Approx(1.25).epsilon(0.03));
  }
  SUBCASE("small shape stays positive") {
    for (int i = 0; i < 2000; ++i) CHECK(gamma_sample(0.01, 1.0, rng) > 0.0);
  }
  CHECK_THROWS_AS(gamma_sample(0.0, 1.0, rng), std::domain_error);
  CHECK_THROWS_AS(gamma_sample(1.0, 0.0, rng), std::domain_error);
}

TEST_CASE("binomial sampler") {
  Rng rng(7);
  CHECK(binomial_sample(0, 0.7, rng) == 0);
  CHECK(binomial_sample(10, 0.0, rng) == 0);
  CHECK(binomial_sample(10, 1.0, rng) == 10);
  CHECK_THROWS_AS(binomial_sample(10, 1.5, rng), std::domain_error);
  CHECK_THROWS_AS(binomial_sample(-1, 0.5, rng), std::domain_error);

  SUBCASE("mean at n=100, p=0.5") {
    double s = 0.0;
    const int reps = 10000;
    for (int i = 0; i < reps; ++i) s += static_cast<double>(binomial_sample(100, 0.5, rng));
    CHECK(std::abs(s / reps - 50.0) < 1.0);
  }
  SUBCASE("large n takes the split path") {
    const std::int64_t n = 200000;
    const double p = 0.3;
    double s = 0.0;
    const int reps = 2000;
    for (int i = 0; i < reps; ++i) s += static_cast<double>(binomial_sample(n, p, rng));
    const double se = std::sqrt(static_cast<double>(n) * p * (1 - p) / reps);
    CHECK(std::abs(s / reps - static_cast<double>(n) * p) < 4.0 * se);
  }
}

TEST_CASE("poisson sampler spans both regimes") {
  Rng rng(42);
  for (double rate : {0.5, 12.0, 80.0, 4000.0}) {
    const int reps = 20000;
    double s = 0.0;
    for (int i = 0; i < reps; ++i) s += static_cast<double>(poisson_sample(rate, rng));
    const double se = std::sqrt(rate / reps);
    CHECK(std::abs(s / reps - rate) < 4.0 * se);
  }
  CHECK(poisson_sample(0.0, rng) == 0);
}

TEST_CASE("decay kernel") {
  CHECK_THROWS_AS(DecayKernel(1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(DecayKernel(2.0, 0.0), std::domain_error);
  const DecayKernel afghan{1.6, 10.0};
  CHECK(decay_expected_delay(afghan) == 1.6);
  CHECK(decay_expected_delay(DecayKernel{1.4, 2.0}) == 1.4);
  CHECK(decay_expected_delay(DecayKernel{1.0 + 1e-9, 1.0}) == 1.0 + 1e-9);
  CHECK_THROWS_AS(decay_pmf(0, afghan), std::domain_error);

  SUBCASE("point mass at the minimum delay") {
    const DecayKernel tight{1.0 + 1e-9, 1.0};
    CHECK(decay_pmf(1, tight) > 1.0 - 1e-6);
    CHECK(decay_tail_prob(1, tight) < 1e-6);
  }
  SUBCASE("normalization at the horizon") {
    for (const DecayKernel& k : {DecayKernel{1.6, 10.0}, DecayKernel{2.0, 1.5}, DecayKernel{3.5, 0.7}}) {
      const std::vector<double> g = decay_weights(k);
      long double mass = 0.0L;
      for (double v : g) {
        CHECK(v >= 0.0);
        mass += v;
      }
      CHECK(static_cast<double>(mass) >= 1.0 - 1e-9);
      CHECK(static_cast<int>(g.size()) == decay_horizon(k));
    }
  }
  SUBCASE("short-tailed fitted kernel") {
    // An Afghanistan-like kernel: expected delay 1.6 days and under 5% of
    // mass beyond day 3.
    CHECK(decay_tail_prob(3, afghan) < 0.05);
    double beyond3 = 0.0;
    for (std::int64_t u = 4; u <= decay_horizon(afghan); ++u) beyond3 += decay_pmf(u, afghan);
    CHECK(beyond3 < 0.05);
    CHECK(beyond3 == doctest::Approx(decay_tail_prob(3, afghan)).epsilon(1e-9));
  }
  SUBCASE("tail vanishes for large k") { CHECK(decay_tail_prob(300, afghan) < 1e-12); }
}

TEST_CASE("slice sampler hits known targets") {
  Rng rng(2024);
  SUBCASE("standard normal") {
    const auto logf = [](double x) { return -0.5 * x * x; };
    std::vector<double> xs(100000);
    double x = 0.0;
    for (double& out : xs) {
      x = slice_sample(logf, x, 1.0, Interval{}, rng);
      out = x;
    }
    CHECK(std::abs(teststat::mean(xs)) < 0.02);
    CHECK(teststat::variance(xs) == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("gamma(2,1) on the half line") {
    const auto logf = [](double x) {
      return x > 0.0 ? std::log(x) - x : -std::numeric_limits<double>::infinity();
    };
    std::vector<double> xs(100000);
    double x = 1.0;
    for (double& out : xs) {
      x = slice_sample(logf, x, 1.0, Interval{0.0, std::numeric_limits<double>::infinity()}, rng);
      out = x;
    }
    CHECK(teststat::mean(xs) == doctest::Approx(2.0).epsilon(0.025));
  }
  SUBCASE("degenerate bounds return the current point") {
    const auto logf = [](double) { return 0.0; };
    CHECK(slice_sample(logf, 1.5, 1.0, Interval{1.5, 1.5}, rng) == 1.5);
  }
  SUBCASE("non-finite density rejected") {
    const auto logf = [](double) { return std::numeric_limits<double>::quiet_NaN(); };
    CHECK_THROWS_AS(slice_sample(logf, 0.0, 1.0, Interval{}, rng), NumericError);
  }
}

TEST_CASE("hit-and-run step") {
  Rng rng(5150);
  SUBCASE("2-d standard normal") {
    const auto logf = [](const Eigen::VectorXd& v) { return -0.5 * v.squaredNorm(); };
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    std::vector<double> xs0(100000), xs1(100000);
    for (std::size_t i = 0; i < xs0.size(); ++i) {
      x = hit_and_run_step(logf, x, rng);
      xs0[i] = x[0];
      xs1[i] = x[1];
    }
    CHECK(std::abs(teststat::mean(xs0)) < 0.03);
    CHECK(std::abs(teststat::mean(xs1)) < 0.03);
    CHECK(teststat::variance(xs0) == doctest::Approx(1.0).epsilon(0.08));
  }
  SUBCASE("correlated normal, rho = 0.9") {
    const double rho = 0.9;
    const double det = 1.0 - rho * rho;
    const auto logf = [&](const Eigen::VectorXd& v) {
      return -0.5 * (v[0] * v[0] - 2.0 * rho * v[0] * v[1] + v[1] * v[1]) / det;
    };
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    std::vector<double> xs0(100000), xs1(100000);
    for (std::size_t i = 0; i < xs0.size(); ++i) {
      x = hit_and_run_step(logf, x, rng);
      xs0[i] = x[0];
      xs1[i] = x[1];
    }
    CHECK(teststat::correlation(xs0, xs1) == doctest::Approx(0.9).epsilon(0.034));
  }
  SUBCASE("1-d matches the univariate slice targets") {
    const auto logf = [](const Eigen::VectorXd& v) {
      return v[0] > 0.0 ? std::log(v[0]) - v[0] : -std::numeric_limits<double>::infinity();
    };
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.0);
    std::vector<double> xs(50000);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      x = hit_and_run_step(logf, x, rng);
      xs[i] = x[0];
    }
    CHECK(teststat::mean(xs) == doctest::Approx(2.0).epsilon(0.04));
  }
}

TEST_SUITE_END();
