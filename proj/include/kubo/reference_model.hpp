#pragma once

#include <span>
#include <vector>

#include "kubo/types.hpp"

namespace kubo {

/// Smooth even cutoff: 1 on |t| ≤ 1, 0 on |t| ≥ 3/2, e^{-1/s} transition in between.
double cutoff(double t);

enum class CutoffShape {
  Radial,       // χ(2^{-N} ‖k‖_ω), ‖k‖_ω = sqrt(k0² + v²k1²)
  Anisotropic,  // χ(2^{-N} k0) χ(2^{-N+1} v k1): different extent in k0 and k1
};

/// One chirality of the reference model: k ↦ χ_N(k) / (Z (ik0 + v k1)).
struct ChiralPropagator {
  double v = 1.0;
  double Z = 1.0;
  int N = 8;
  CutoffShape shape = CutoffShape::Radial;

  double norm(Momentum2 k) const { return std::hypot(k.k0, v * k.k1); }
  double chi(Momentum2 k) const;
  cplx D(Momentum2 k) const { return cplx(v * k.k1, k.k0); }
  cplx operator()(Momentum2 k) const;
};

/// β = L antiperiodic grid: both components of k in (2π/β)(ℤ + 1/2).
struct ReferenceGrid {
  double beta;

  double spacing() const { return 2.0 * pi / beta; }
  /// Throws GridTooCoarse if p is off the bosonic grid or the cutoff shell at scale N has fewer
  /// than 64 points across.
  void check(Momentum2 p, int N) const;
  /// Smallest β = base·n (n ≥ 1) that resolves scale N.
  static ReferenceGrid for_scale(double base, int N);
};

/// Δ(k,p) g(k-p) g(k) as written, with Δ = Z[-D(k-p)/χ(k-p) + D(k)/χ(k) + D(p)]. Needs χ > 0 at both points.
cplx delta_gg_raw(const ChiralPropagator& g, Momentum2 k, Momentum2 p);

/// The same product after cancelling χ against the propagator numerators:
/// [χ(k-p)(1+χ(k))/D(k-p) - χ(k)(1+χ(k-p))/D(k)] / Z.
cplx delta_gg(const ChiralPropagator& g, Momentum2 k, Momentum2 p);

/// -(1/βL)(Z/D(p)) Σ_k Δ(k,p) g(k-p) g(k). After a grid shift only the cutoff shell contributes,
/// which is what is summed.
cplx anomalous_bubble_N(const ChiralPropagator& g, Momentum2 p, const ReferenceGrid& grid);

/// (1/(4π|v|)) (-ip0 + v p1)/(ip0 + v p1).
cplx bubble_closed_form(Momentum2 p, double v);

/// (δ + 𝔅_ω Z_ω^{-1} λ_ωω' Z_ω' v̂)^{-1}. Throws NearSingularT past condition 1e12.
CMat t_matrix(std::span<const cplx> bubble, const RMat& Lambda, const RVec& Z, double vhat);
/// Same with 𝔅 from the closed form at p.
CMat t_matrix(Momentum2 p, const RMat& Lambda, const RVec& Z, const RVec& v, double vhat);

/// |g(k)g(k+p) - (g(k) - g(k+p))/(Z D(p))|: the free vertex Ward identity, exact where χ = 1 at k and k+p.
double vertex_ward_residual(const ChiralPropagator& g, Momentum2 k, Momentum2 p);

/// -(1/βL) Σ_k Σ_orderings Π_t g(K_t) for insertions p_1..p_{m-1} and p_m = -Σ p_i; orderings keep
/// insertion 1 first. single_ordering keeps only the identity ordering (for scale comparisons).
cplx chiral_m_loop(const ChiralPropagator& g, std::span<const Momentum2> p, const ReferenceGrid& grid,
                   bool single_ordering = false);

struct LoopScanRow {
  int N;
  cplx value;
  double single_ordering;  // |one ordering alone|, the scale the cancellation is measured against
};

struct LoopScan {
  std::vector<LoopScanRow> rows;
  double gamma_hat;  // from log(|loop|/N) = c - γ N ln 2
  double gamma_stderr;
};

/// chiral_m_loop for N in [N_lo, N_hi] on one fixed grid, with the decay fit.
LoopScan chiral_loop_scan(double v, CutoffShape shape, std::span<const Momentum2> p, int N_lo, int N_hi,
                          const ReferenceGrid& grid);

struct BubbleScanRow {
  int N;
  cplx value;
  cplx richardson;  // 2𝔅^N - 𝔅^{N-1}
  double error;     // |𝔅^N - closed form|
};

std::vector<BubbleScanRow> bubble_scan(double v, Momentum2 p, int N_lo, int N_hi, const ReferenceGrid& grid);

}  // namespace kubo
