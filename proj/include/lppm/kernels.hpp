#pragma once

// Scalar primitives shared by the evaluation, fitting and prediction code.
// Templated on the scalar type so they can be instantiated for long double
// in oracle checks.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>

namespace lppm {

/// beta * omega * exp(-omega * dt)
template <typename Scalar>
Scalar excitation(Scalar beta, Scalar omega, Scalar dt) {
  using std::exp;
  return beta * omega * exp(-omega * dt);
}

/// Integral of the excitation over [0, span]: beta * (1 - exp(-omega * span)).
template <typename Scalar>
Scalar excitation_mass(Scalar beta, Scalar omega, Scalar span) {
  using std::expm1;
  return -beta * expm1(-omega * span);
}

/// Log density of a bivariate normal. Returns -inf if the covariance is
/// not positive definite.
template <typename DerivedX, typename DerivedM, typename DerivedC>
typename DerivedX::Scalar gaussian_log_density(const Eigen::MatrixBase<DerivedX>& x,
                                               const Eigen::MatrixBase<DerivedM>& mean,
                                               const Eigen::MatrixBase<DerivedC>& cov) {
  using Scalar = typename DerivedX::Scalar;
  using std::log;
  const Eigen::Matrix<Scalar, 2, 2> c = cov;
  const Scalar det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
  if (!(c(0, 0) > Scalar(0)) || !(det > Scalar(0))) {
    return -std::numeric_limits<Scalar>::infinity();
  }
  const Eigen::Matrix<Scalar, 2, 1> d = x - mean;
  // Closed-form 2x2 inverse quadratic form.
  const Scalar q = (c(1, 1) * d(0) * d(0) - (c(0, 1) + c(1, 0)) * d(0) * d(1) + c(0, 0) * d(1) * d(1)) / det;
  return -log(Scalar(2) * std::numbers::pi_v<Scalar>) - Scalar(0.5) * log(det) - Scalar(0.5) * q;
}

/// log(sum(exp(v))) for a fixed-size or dynamic Eigen vector.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  using std::log;
  if (v.size() == 0) return -std::numeric_limits<Scalar>::infinity();
  const Scalar m = v.maxCoeff();
  if (!std::isfinite(static_cast<double>(m))) return m;
  return m + log((v.array() - m).exp().sum());
}

}  // namespace lppm
