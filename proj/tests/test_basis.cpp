#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "diffcon/basis.hpp"
#include "diffcon/errors.hpp"
#include "diffcon/rng.hpp"

using namespace diffcon;

TEST_SUITE_BEGIN("basis");

TEST_CASE("degree-0 basis is an indicator") {
  BasisSpec spec;
  spec.degree = 0;
  spec.interior_knots = {0.5};
  spec.lo = 0.0;
  spec.hi = 1.0;
  const std::vector<double> pts{0.25, 0.75, 1.0};
  const DesignMatrix m = build_basis(spec, pts);
  CHECK(m.values(0, 0) == 1.0);
  CHECK(m.values(0, 1) == 0.0);
  CHECK(m.values(1, 1) == 1.0);
  CHECK(m.values(2, 1) == 1.0);  // hi lands in the last span
}

TEST_CASE("degree-1 hat functions") {
  BasisSpec spec;
  spec.degree = 1;
  spec.lo = 0.0;
  spec.hi = 1.0;
  const std::vector<double> pts{0.25};
  const DesignMatrix m = build_basis(spec, pts);
  CHECK(m.values(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(m.values(0, 1) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("partition of unity and local support") {
  BasisSpec spec;
  spec.degree = 3;
  spec.lo = 0.0;
  spec.hi = 364.0;
  spec.interior_knots = {91.0, 182.0, 273.0};
  Rng rng(31);
  std::vector<double> pts(1000);
  for (double& p : pts) p = rng.uniform(0.0, 364.0);
  pts.push_back(0.0);
  pts.push_back(364.0);
  const DesignMatrix m = build_basis(spec, pts);
  CHECK(m.cols() == spec.n_basis());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    int nonzero = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m.values(r, c);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
      if (v != 0.0) ++nonzero;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(nonzero <= spec.degree + 1);
  }
  // Last basis function takes value 1 at the upper boundary.
  CHECK(m.values(m.rows() - 1, m.cols() - 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("points outside the domain are rejected") {
  BasisSpec spec;
  spec.degree = 3;
  spec.lo = 0.0;
  spec.hi = 10.0;
  const std::vector<double> pts{10.5};
  CHECK_THROWS_AS(build_basis(spec, pts), std::domain_error);
}

TEST_CASE("invalid specs are rejected") {
  BasisSpec spec;
  spec.degree = 3;
  spec.lo = 0.0;
  spec.hi = 1.0;
  spec.interior_knots = {0.5, 0.5};
  const std::vector<double> pts{0.1};
  CHECK_THROWS_AS(build_basis(spec, pts), ConfigError);
  spec.interior_knots = {1.5};
  CHECK_THROWS_AS(build_basis(spec, pts), ConfigError);
}

TEST_CASE("rw1 penalty structure") {
  const Eigen::MatrixXd k3 = rw1_penalty(3);
  Eigen::MatrixXd expect(3, 3);
  expect << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK((k3 - expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(rw1_penalty(1), std::domain_error);

  SUBCASE("rows sum to zero (constants in the null space)") {
    const Eigen::MatrixXd k = rw1_penalty(7);
    CHECK((k * Eigen::VectorXd::Ones(7)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("quadratic form is the sum of squared differences") {
    Eigen::VectorXd beta(3);
    beta << 1, 2, 4;
    CHECK(beta.dot(rw1_penalty(3) * beta) == doctest::Approx(5.0).epsilon(1e-14));
  }
  SUBCASE("positive semidefinite with rank n-1") {
    for (int n : {2, 5, 10, 25}) {
      const Eigen::MatrixXd k = rw1_penalty(n);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
      CHECK(es.eigenvalues().minCoeff() > -1e-12);
      int null_dim = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(es.eigenvalues()[i]) < 1e-10) ++null_dim;
      CHECK(null_dim == 1);
    }
  }
}

TEST_CASE("default time spec") {
  SUBCASE("one year") {
    const BasisSpec s = default_time_spec(365);
    CHECK(s.interior_knots.size() == 4);
    CHECK(s.n_basis() == 8);
    CHECK(s.lo == 0.0);
    CHECK(s.hi == 364.0);
  }
  SUBCASE("seventeen years") {
    CHECK(default_time_spec(6209).interior_knots.size() == 68);
  }
  SUBCASE("minimum length") {
    const BasisSpec s = default_time_spec(30);
    CHECK(s.interior_knots.empty());
    CHECK(s.n_basis() == 4);
    CHECK_THROWS_AS(default_time_spec(29), ConfigError);
  }
}

TEST_CASE("default fatality spec") {
  const BasisSpec s = default_fatality_spec(0.0, 3.2);
  CHECK(s.n_basis() == 11);
  CHECK(s.interior_knots.size() == 7);
  SUBCASE("degenerate range widened") {
    const BasisSpec d = default_fatality_spec(0.0, 0.0);
    CHECK(d.hi == 1.0);
    d.validate();
  }
}

TEST_CASE("infinite penalty forces a constant fit") {
  // argmin beta' K beta subject to a fixed coefficient sum is the constant
  // vector; solve the equality-constrained problem via its KKT system.
  const int n = 5;
  const Eigen::MatrixXd k = rw1_penalty(n);
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = k;
  kkt.topRightCorner(n, 1) = Eigen::VectorXd::Ones(n);
  kkt.bottomLeftCorner(1, n) = Eigen::RowVectorXd::Ones(n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs[n] = 7.5;  // required sum
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  for (int i = 0; i < n; ++i) CHECK(sol[i] == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_SUITE_END();
