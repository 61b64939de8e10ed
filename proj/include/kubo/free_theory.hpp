#pragma once

#include <span>
#include <vector>

#include "kubo/lattice_model.hpp"

namespace kubo {

struct MatsubaraGrid {
  double beta;
  int L;
  int N0 = 10;  // |k0| ≤ 2^N0

  double spacing() const { return 2.0 * pi / beta; }
  double fermionic(long n) const { return spacing() * (double(n) + 0.5); }
  double bosonic(long n) const { return spacing() * double(n); }
  double momentum(int j) const { return 2.0 * pi * j / L; }
  /// Fermionic frequencies kept: n in [-n_max, n_max).
  long n_max() const;
  bool is_bosonic(double p0, double tol = 1e-9) const;
  bool on_lattice(double p1, double tol = 1e-9) const;
};

/// Loop value with the analytic estimate of the discarded frequency tail (already added in).
struct LoopResult {
  cplx value;
  cplx tail;
  int N0;
};

/// λ = 0 Euclidean correlators of the lattice model at finite β, L.
class FreeTheory {
 public:
  FreeTheory(BlochHamiltonian H, double mu, double beta, int L);

  const BlochHamiltonian& hamiltonian() const { return H_; }
  double mu() const { return mu_; }
  double beta() const { return beta_; }
  int L() const { return L_; }

  /// (ik0 + Ĥ(k1) - μ)^{-1}. Throws SingularPropagator when ill conditioned.
  CMat propagator(double k0, double k1) const;

  /// (1/βL)⟨T n̂_p ; ĵ_{ν,-p}⟩ from the Lehmann form. p1 must lie on the lattice. p0 need not be a
  /// Matsubara frequency: off the grid the same expression is the retarded real-time Kubo kernel.
  cplx density_current_bubble(Momentum2 p, int nu) const;

  /// (1/βL)⟨T n̂_{p_1}; …; n̂_{p_{m-1}}; ĵ_{ν,p_m}⟩ with p_m = -Σ p_i, from truncated Matsubara sums.
  /// N0 < 0 selects the default cutoff. Throws CutoffTooLow if the tail of some cyclic ordering
  /// exceeds 10% of both the value and the largest single ordering.
  LoopResult m_point_density_loop(std::span<const Momentum2> p, int nu, int N0 = -1) const;

  /// Smallest N0 with 2^N0 ≥ 100·max(|p0|, bandwidth).
  int default_N0(std::span<const Momentum2> p) const;

  /// Band data at lattice momentum 2πj/L (j taken mod L).
  const RVec& energies(int j) const { return bands_[wrap(j)].energies; }
  const CMat& states(int j) const { return bands_[wrap(j)].states; }

 private:
  int wrap(int j) const { return ((j % L_) + L_) % L_; }
  int lattice_index(double p1) const;

  BlochHamiltonian H_;
  double mu_;
  double beta_;
  int L_;
  std::vector<BandSample> bands_;
  double bandwidth_;
};

/// Grassmann field label for the Wick rule.
struct FieldLabel {
  Momentum2 k;
  int rho;
};

/// det[βL δ_{k_i,p_j} g_{ρ_i ρ'_j}(k_i)] for annihilation fields (k_i, ρ_i) and creation fields (p_j, ρ'_j).
cplx wick_determinant(const FreeTheory& ft, std::span<const FieldLabel> minus, std::span<const FieldLabel> plus);

}  // namespace kubo
