#pragma once

#include <complex>
#include <functional>
#include <numbers>

#include <Eigen/Dense>

namespace kubo {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

/// Euclidean momentum (k0, k1): frequency and lattice/continuum momentum.
struct Momentum2 {
  double k0 = 0.0;
  double k1 = 0.0;

  friend Momentum2 operator+(Momentum2 a, Momentum2 b) { return {a.k0 + b.k0, a.k1 + b.k1}; }
  friend Momentum2 operator-(Momentum2 a, Momentum2 b) { return {a.k0 - b.k0, a.k1 - b.k1}; }
  friend Momentum2 operator-(Momentum2 a) { return {-a.k0, -a.k1}; }
};

/// Fourier profile of a drive or reference interaction, q ↦ f̂(q).
using ProfileHat = std::function<double(double)>;

// Logistic form, safe for |x| large.
inline double fermi(double beta, double xi) {
  const double x = beta * xi;
  if (x > 0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

/// -d f/d xi, again without overflow.
inline double fermi_slope(double beta, double xi) {
  const double e = std::exp(-std::abs(beta * xi));
  return beta * e / ((1.0 + e) * (1.0 + e));
}

}  // namespace kubo
