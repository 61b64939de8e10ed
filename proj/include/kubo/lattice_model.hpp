#pragma once

#include <array>
#include <span>
#include <vector>

#include "kubo/types.hpp"

namespace kubo {

/// Finite-range, translation-invariant hopping. blocks[d] is the M×M block H(d) coupling
/// a*_{x+d} to a_x, for d = 0..R; negative displacements are the adjoints.
class BlochHamiltonian {
 public:
  BlochHamiltonian(int M, std::vector<CMat> blocks);

  /// Nearest-neighbour chain: H(0) = 2t, H(±1) = -t, dispersion 2t(1 - cos k).
  static BlochHamiltonian laplacian(double t = 1.0);

  int dim() const { return M_; }
  int range() const { return static_cast<int>(blocks_.size()) - 1; }
  CMat block(int d) const;

 private:
  int M_;
  std::vector<CMat> blocks_;
};

/// Σ_d e^{-ikd} H(d), symmetrized.
CMat bloch_matrix(const BlochHamiltonian& H, double k);

/// dĤ/dk = Σ_d (-id) e^{-ikd} H(d).
CMat bloch_derivative(const BlochHamiltonian& H, double k);

struct BandSample {
  double k;
  RVec energies;  // ascending
  CMat states;    // columns orthonormal
};

std::vector<BandSample> band_structure(const BlochHamiltonian& H, std::span<const double> grid);

struct FermiDatum {
  int omega;   // 1..Nf, ordered by k_F
  double k_F;  // in [0, 2π)
  double v;    // ∂_k e_band at k_F
  int band;
};

struct AssumptionReport {
  bool nondegenerate = true;   // crossing eigenvalue isolated from the other bands
  bool distinct_points = true;
  bool elastic = true;         // no nontrivial k1 - k2 = k3 - k4 mod 2π
  bool net_chirality_zero = true;
  double min_gap = 0.0;
  std::vector<std::array<int, 4>> violations;  // omega labels of offending quadruples
};

struct FermiSurface {
  std::vector<FermiDatum> points;
  AssumptionReport report;
};

struct FermiSearchOptions {
  int grid = 4096;
  double root_tol = 1e-12;
  double delta_degen = 1e-8;
  double elastic_tol = 1e-9;
  double velocity_tol = 1e-8;
};

/// Throws NoFermiPoint when μ crosses no band and BandEdge when a root has |v| below tolerance.
/// Degeneracy and elastic-scattering failures are reported, not thrown; see require_assumptions.
FermiSurface find_fermi_points(const BlochHamiltonian& H, double mu, const FermiSearchOptions& opt = {});

/// Throws DegenerateCrossing or ElasticScatteringViolated if the report says so.
void require_assumptions(const FermiSurface& fs);

/// ν = 0: identity. ν = 1: i(Ĥ(k) - Ĥ(k-p)) / (1 - e^{-ip}), evaluated through the geometric
/// sum over each hopping so that p → 0 needs no special branch.
CMat current_vertex(const BlochHamiltonian& H, int nu, double k, double p);

class TwoBodyPotential {
 public:
  TwoBodyPotential() = default;
  /// w[d] for d = 0..range; w(-d) = w(d).
  explicit TwoBodyPotential(std::vector<double> w);
  static TwoBodyPotential nearest_neighbour(double w1 = 1.0) { return TwoBodyPotential({0.0, w1}); }

  int range() const { return static_cast<int>(w_.size()) - 1; }
  double operator()(int d) const;
  double fourier(double k) const;

 private:
  std::vector<double> w_{0.0};
};

struct LatticeModel {
  BlochHamiltonian hopping = BlochHamiltonian::laplacian();
  TwoBodyPotential potential;
  double mu = 2.0;
  double lambda = 0.0;
};

/// One-particle Hamiltonian on Γ_L, mode index x*M + ρ, periodized.
CMat real_space_hamiltonian(const BlochHamiltonian& H, int L);

/// Kernel C of the lattice current j_x = Σ a*_u C_{uw} a_w, satisfying i[h, n_x] + j_x - j_{x-1} = 0.
CMat current_kernel(const BlochHamiltonian& H, int L, int x);

/// Kernel of j_{ν,x}: the density projector for ν = 0.
CMat observable_kernel(const BlochHamiltonian& H, int L, int nu, int x);

/// Wraps to (-π, π].
double wrap_angle(double k);

}  // namespace kubo
