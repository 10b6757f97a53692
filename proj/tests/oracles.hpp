#pragma once

// Slow, independent reference computations used only by the tests.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

namespace oracle {

/// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt by the trapezoidal rule.
/// The integrand is even and analytic in |Im t| < pi/2, so the rule converges
/// like exp(-pi^2 / h); h = 1/64 is far below double precision.
inline double bessel_k_quadrature(double nu, double x) {
  const long double h = 1.0L / 64;
  long double sum = 0.5L * std::exp(-static_cast<long double>(x));
  long double peak = sum;
  for (std::size_t k = 1;; ++k) {
    const long double t = h * static_cast<long double>(k);
    const long double term = std::exp(-x * std::cosh(t) + nu * t) * 0.5L * (1.0L + std::exp(-2.0L * nu * t));
    sum += term;
    peak = std::max(peak, term);
    if (term < 1e-22L * peak && x * std::cosh(t) > nu * t + 60) break;
  }
  return static_cast<double>(h * sum);
}

/// Matérn covariance straight from its definition with the quadrature Bessel function.
inline double matern(double r, double variance, double range, double smoothness) {
  if (r == 0.0) return variance;
  const double x = r / range;
  return variance / (std::pow(2.0, smoothness - 1.0) * std::tgamma(smoothness)) * std::pow(x, smoothness) *
         bessel_k_quadrature(smoothness, x);
}

/// ||a - b||_F / ||b||_F
inline double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

/// Best achievable rank-k error from a full SVD: sqrt(sum_{i >= k} s_i^2).
inline double svd_tail(const Eigen::MatrixXd& a, Eigen::Index k) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  return k >= s.size() ? 0.0 : s.tail(s.size() - k).norm();
}

}  // namespace oracle
