#pragma once

#include <span>

#include "kubo/lattice_model.hpp"

namespace kubo {

/// Renormalized velocities v (diagonal), symmetric chirality coupling Λ with zero diagonal,
/// a = θ/η and wavefunction renormalizations Z.
struct ResponseMatrixSet {
  RVec v;
  RMat Lambda;
  double a = 1.0;
  RVec Z;

  int nf() const { return static_cast<int>(v.size()); }
  /// Throws InvalidArgument on shape mismatch, asymmetric Λ, nonzero diagonal, zero velocity, a ≤ 0
  /// or ‖Λ‖/(4π min|v|) ≥ 1.
  void validate() const;

  /// v = v*σ₃, Λ = λ*σ₁, Z = 1.
  static ResponseMatrixSet two_chirality(double v_star, double lambda_star, double a);
  /// Free velocities from a Fermi surface, Λ_ωω' = λ off the diagonal.
  static ResponseMatrixSet lambda_linear(const FermiSurface& fs, double lambda, double a);
};

/// (1 - Λ/4π|v|)(1 + ((i/a+vq)/(-i/a+vq)) Λ/4π|v|)^{-1}. Throws NearSingularT past condition 1e12.
CMat k_tilde(const ResponseMatrixSet& s, double q);

/// 𝔎⁰ = 1, 𝔎¹ = sgn v (1 + Λ/4π|v|)(1 - Λ/4π|v|)^{-1} sgn v.
CMat frak_k(const ResponseMatrixSet& s, int nu);

/// K̃(q) v^ν/(2π|v|) vq/(-i/a+vq) 𝔎^ν.
CMat k_nu(const ResponseMatrixSet& s, double q, int nu);

struct TwoChiralitySums {
  double sum_k0;
  cplx sum_k1;
};

/// Entry sums of K⁰ and K¹ for v = v*σ₃, Λ = λ*σ₁ in closed form.
TwoChiralitySums two_chirality_closed_forms(double v_star, double lambda_star, double q, double a);

struct ChiLinResult {
  double value;
  double imag;   // residual imaginary part, zero for real profiles
  double error;  // quadrature error estimate
};

/// -∫ μ̂_∞(q) e^{iθqx} Σ_{ωω'} K^ν_{ωω'}(q) dq/2π over [-support, support] by adaptive
/// Gauss–Kronrod. The set's a is used as given. Throws QuadratureFailure if the error exceeds 1e-10.
ChiLinResult chi_lin(const ResponseMatrixSet& s, double x, double theta, int nu, const ProfileHat& mu_hat,
                     double support = 1.0);

struct VertexRenormalizations {
  RVec z0;
  RVec z1;
};

/// [1 - (-1)^μ Λ_Zᵀ (4π|v|)^{-1}] v_μ Z with Λ_Z = Z^{-1} Λ Z. Throws NearSingular when either
/// 1 ∓ Λ_Zᵀ/(4π|v|) is numerically singular.
VertexRenormalizations vertex_renormalizations(const RVec& v, const RMat& Lambda, const RVec& Z);

}  // namespace kubo
