#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "kubo/lattice_model.hpp"

namespace kubo {

/// Occupation basis of `modes` fermionic modes, split by particle number. Mode m = x*M + ρ;
/// the Jordan–Wigner string of a_m runs over modes below m.
class FockSpace {
 public:
  explicit FockSpace(int modes);

  int modes() const { return modes_; }
  int sectors() const { return modes_ + 1; }
  const std::vector<std::uint32_t>& states(int N) const { return states_[N]; }
  int index(std::uint32_t s) const { return index_.at(s); }

 private:
  int modes_;
  std::vector<std::vector<std::uint32_t>> states_;
  std::unordered_map<std::uint32_t, int> index_;
};

/// Number-conserving operator stored as one dense block per particle-number sector.
struct BlockOp {
  std::vector<CMat> blocks;

  BlockOp& operator+=(const BlockOp& o);
  BlockOp& operator-=(const BlockOp& o);
  BlockOp& operator*=(cplx c);
  friend BlockOp operator+(BlockOp a, const BlockOp& b) { return a += b; }
  friend BlockOp operator-(BlockOp a, const BlockOp& b) { return a -= b; }
  friend BlockOp operator*(cplx c, BlockOp a) { return a *= c; }
  friend BlockOp operator*(const BlockOp& a, const BlockOp& b);
  BlockOp adjoint() const;
  /// Largest singular value over sectors.
  double norm() const;
};

BlockOp commutator(const BlockOp& a, const BlockOp& b);

/// Σ_{mn} A_{mn} a*_m a_n.
BlockOp bilinear(const FockSpace& F, const CMat& A);

/// Dense 2^modes matrix of a_m over the full Fock space (for algebra checks on small systems).
CMat dense_annihilator(int modes, int m);

/// Gibbs ensemble of H - μN with H = hopping + λ Σ (n-1/2) w (n-1/2), diagonalized per sector.
class ManyBodyEnsemble {
 public:
  ManyBodyEnsemble(const LatticeModel& model, int L, double beta, int max_modes = 14);

  const FockSpace& fock() const { return fock_; }
  const LatticeModel& model() const { return model_; }
  int L() const { return L_; }
  double beta() const { return beta_; }
  /// H - μN in the site basis.
  const BlockOp& hamiltonian() const { return K_site_; }
  /// Eigenvalues of H - μN minus the global minimum, per sector.
  const RVec& energies(int N) const { return E_[N]; }
  const CMat& eigenvectors(int N) const { return V_[N]; }
  /// e^{-βK_a}/Z.
  const RVec& weights(int N) const { return w_[N]; }
  double partition_shifted() const { return Z_; }
  double eigen_residual() const { return residual_; }

  BlockOp to_eigenbasis(const BlockOp& site) const;
  BlockOp to_site_basis(const BlockOp& eig) const;

  BlockOp number() const;
  BlockOp density(int x) const;
  BlockOp observable(int nu, int x) const;
  /// Σ_x e^{-ipx} j_{ν,x}.
  BlockOp fourier_observable(int nu, double p) const;
  BlockOp one_body(const CMat& A) const { return bilinear(fock_, A); }

  /// Gibbs mean of an operator given in the site basis.
  cplx expectation(const BlockOp& site) const;

 private:
  LatticeModel model_;
  int L_;
  double beta_;
  FockSpace fock_;
  BlockOp K_site_;
  std::vector<RVec> E_;
  std::vector<CMat> V_;
  std::vector<RVec> w_;
  double Z_ = 0.0;
  double residual_ = 0.0;
};

/// ⟨T γ_{t_1}(O_1); …; γ_{t_n}(O_n)⟩ at distinct times (taken mod β). Operators in the eigenbasis.
cplx euclidean_cumulant(const ManyBodyEnsemble& ens, std::span<const BlockOp> eig_ops, std::span<const double> times);

/// Plain time-ordered moment at distinct times; operators in the eigenbasis.
cplx euclidean_moment(const ManyBodyEnsemble& ens, std::span<const BlockOp> eig_ops, std::span<const double> times);

/// ∫ Π ds_j e^{-i q_j s_j} ⟨T γ_{s_1}(O_1); …; γ_{s_n}(O_n)⟩ over [0,β)^n with bosonic q_j.
/// With anchor_last the last operator sits at time 0 and is not integrated. Time integrals are
/// exact: each ordered simplex integral is an entry of a bidiagonal matrix exponential.
cplx integrated_cumulant(const ManyBodyEnsemble& ens, std::span<const BlockOp> eig_ops, std::span<const double> q,
                         bool anchor_last);

/// |⟨γ_t(A)γ_s(B)⟩ - ⟨γ_{s+β}(B)γ_t(A)⟩|, site-basis operators.
double kms_check(const ManyBodyEnsemble& ens, const BlockOp& A, const BlockOp& B, double t, double s);

struct WickRotationResult {
  cplx lhs;
  cplx rhs;
  double residual;
};

/// Real-time n-fold ordered Duhamel integral (closed form) against the Euclidean cumulant side.
/// Throws EtaNotMatsubara unless η_β ∈ (2π/β)ℕ₊.
WickRotationResult wick_rotation_check(const ManyBodyEnsemble& ens, int n, const BlockOp& O, const BlockOp& P,
                                       double eta_beta, double t = 0.0);

/// Operator norm of i[H, n_x] + j_x - j_{x-1}.
double continuity_check(const ManyBodyEnsemble& ens, int x);

/// (1/βL)⟨T n̂_{(p0,0)}; ĵ_{ν,(-p0,0)}⟩.
cplx ward_p0_value(const ManyBodyEnsemble& ens, double p0, int nu);

/// (1/βL)⟨T n̂_{p_1}; …; n̂_{p_{m-1}}; ĵ_{ν,p_m}⟩ with p_m = -Σ p_i, for comparison with loop sums.
cplx fourier_correlator(const ManyBodyEnsemble& ens, std::span<const Momentum2> p, int nu);

struct SmallResponse {
  std::vector<double> chi;  // per site
  double unitarity_defect = 0.0;
  double t0 = 0.0;
};

/// Evolves the Gibbs state under H + e^{ηt} Σ_x V(x) n_x from t0 to 0 and returns
/// (Tr j_{ν,x} ρ(0) - Tr j_{ν,x} ρ_eq)/θ for every site. V is the full profile θμ(θx).
SmallResponse full_response_small(const ManyBodyEnsemble& ens, double eta, double theta, std::span<const double> V,
                                  int nu, double t0, double tol = 1e-13);

}  // namespace kubo
