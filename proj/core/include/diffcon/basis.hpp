#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace diffcon {

// B-spline basis over a closed domain [lo, hi] with strictly increasing
// interior knots. Number of basis functions = interior knots + degree + 1.
struct BasisSpec {
  int degree = 3;
  std::vector<double> interior_knots;
  double lo = 0.0;
  double hi = 1.0;

  int n_basis() const { return static_cast<int>(interior_knots.size()) + degree + 1; }

  // Single constant basis function (degree 0, no knots): an intercept-only
  // design whose rows are all exactly 1.
  static BasisSpec constant(double lo = 0.0, double hi = 1.0);

  void validate() const;
};

// Evaluated basis: rows = evaluation points, cols = basis functions.
// Every row sums to 1 and all entries lie in [0, 1].
struct DesignMatrix {
  Eigen::MatrixXd values;
  BasisSpec spec;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Cox-de Boor evaluation at the given points (all must lie in [lo, hi]).
DesignMatrix build_basis(const BasisSpec& spec, std::span<const double> points);

// First-order random-walk penalty: tridiagonal, diagonal (1, 2, ..., 2, 1),
// off-diagonals -1. Symmetric PSD with rank n_basis - 1.
Eigen::MatrixXd rw1_penalty(int n_basis);

// Cubic basis over day indices [0, n_days - 1] with interior knots equally
// spaced, one per ~91 days (quarterly). Requires n_days >= 30.
BasisSpec default_time_spec(int n_days);

// Cubic basis over observed log(fatalities + 1) with equally spaced interior
// knots (default 7, giving 11 basis functions). A degenerate range is
// widened to unit length.
BasisSpec default_fatality_spec(double lo, double hi, int n_interior = 7);

}  // namespace diffcon
