#include "diffcon/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "diffcon/errors.hpp"

namespace diffcon {

BasisSpec BasisSpec::constant(double lo, double hi) {
  BasisSpec s;
  s.degree = 0;
  s.lo = lo;
  s.hi = hi;
  return s;
}

void BasisSpec::validate() const {
  if (degree < 0) throw ConfigError("BasisSpec: degree must be nonnegative");
  if (!(lo < hi)) throw ConfigError("BasisSpec: domain must have positive length");
  double prev = lo;
  for (double k : interior_knots) {
    if (!(k > prev) || !(k < hi))
      throw ConfigError("BasisSpec: interior knots must be strictly increasing inside the domain");
    prev = k;
  }
}

namespace {

// Clamped knot vector: lo and hi repeated degree+1 times around the
// interior knots.
std::vector<double> clamped_knots(const BasisSpec& spec) {
  std::vector<double> knots;
  knots.reserve(2 * static_cast<std::size_t>(spec.degree + 1) + spec.interior_knots.size());
  for (int i = 0; i <= spec.degree; ++i) knots.push_back(spec.lo);
  knots.insert(knots.end(), spec.interior_knots.begin(), spec.interior_knots.end());
  for (int i = 0; i <= spec.degree; ++i) knots.push_back(spec.hi);
  return knots;
}

}  // namespace

DesignMatrix build_basis(const BasisSpec& spec, std::span<const double> points) {
  spec.validate();
  const int degree = spec.degree;
  const int n_basis = spec.n_basis();
  const std::vector<double> knots = clamped_knots(spec);
  // Valid spans are [degree, last_span]; x == hi lands in the last span.
  const int last_span = static_cast<int>(knots.size()) - degree - 2;

  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points.size()), n_basis);
  std::vector<double> vals(static_cast<std::size_t>(degree + 1));
  std::vector<double> left(static_cast<std::size_t>(degree + 1));
  std::vector<double> right(static_cast<std::size_t>(degree + 1));

  for (std::size_t r = 0; r < points.size(); ++r) {
    const double x = points[r];
    if (!(x >= spec.lo && x <= spec.hi))
      throw std::domain_error("build_basis: point " + std::to_string(r) + " (" + std::to_string(x) +
                              ") outside basis domain [" + std::to_string(spec.lo) + ", " +
                              std::to_string(spec.hi) + "]");
    // Knot span containing x.
    int span = static_cast<int>(std::upper_bound(knots.begin() + degree, knots.begin() + last_span + 1, x) -
                                knots.begin()) - 1;
    span = std::clamp(span, degree, last_span);

    // Triangular Cox-de Boor recurrence for the degree+1 active functions.
    vals[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
      left[static_cast<std::size_t>(j)] = x - knots[static_cast<std::size_t>(span + 1 - j)];
      right[static_cast<std::size_t>(j)] = knots[static_cast<std::size_t>(span + j)] - x;
      double saved = 0.0;
      for (int i = 0; i < j; ++i) {
        const double denom = right[static_cast<std::size_t>(i + 1)] + left[static_cast<std::size_t>(j - i)];
        const double temp = vals[static_cast<std::size_t>(i)] / denom;
        vals[static_cast<std::size_t>(i)] = saved + right[static_cast<std::size_t>(i + 1)] * temp;
        saved = left[static_cast<std::size_t>(j - i)] * temp;
      }
      vals[static_cast<std::size_t>(j)] = saved;
    }
    for (int i = 0; i <= degree; ++i)
      values(static_cast<Eigen::Index>(r), span - degree + i) = vals[static_cast<std::size_t>(i)];
  }
  return DesignMatrix{std::move(values), spec};
}

Eigen::MatrixXd rw1_penalty(int n_basis) {
  if (n_basis < 2) throw std::domain_error("rw1_penalty: need at least 2 basis functions");
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n_basis, n_basis);
  for (int i = 0; i < n_basis; ++i) {
    k(i, i) = (i == 0 || i == n_basis - 1) ? 1.0 : 2.0;
    if (i + 1 < n_basis) {
      k(i, i + 1) = -1.0;
      k(i + 1, i) = -1.0;
    }
  }
  return k;
}

BasisSpec default_time_spec(int n_days) {
  if (n_days < 30) throw ConfigError("default_time_spec: need at least 30 days");
  const double length = static_cast<double>(n_days - 1);
  const int n_interior = static_cast<int>(length / 91.0);
  BasisSpec spec;
  spec.degree = 3;
  spec.lo = 0.0;
  spec.hi = length;
  spec.interior_knots.reserve(static_cast<std::size_t>(n_interior));
  for (int i = 1; i <= n_interior; ++i)
    spec.interior_knots.push_back(length * static_cast<double>(i) / static_cast<double>(n_interior + 1));
  return spec;
}

BasisSpec default_fatality_spec(double lo, double hi, int n_interior) {
  if (n_interior < 0) throw ConfigError("default_fatality_spec: negative knot count");
  if (!(hi > lo)) hi = lo + 1.0;
  BasisSpec spec;
  spec.degree = 3;
  spec.lo = lo;
  spec.hi = hi;
  spec.interior_knots.reserve(static_cast<std::size_t>(n_interior));
  for (int i = 1; i <= n_interior; ++i)
    spec.interior_knots.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_interior + 1));
  return spec;
}

}  // namespace diffcon
