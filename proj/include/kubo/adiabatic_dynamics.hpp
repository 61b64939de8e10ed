#pragma once

#include <functional>
#include <span>
#include <vector>

#include "kubo/fit.hpp"
#include "kubo/free_theory.hpp"
#include "kubo/magnus.hpp"

namespace kubo {

/// exp(1 - 1/(1-q²)) on |q| < 1, zero outside.
double mu_hat_bump(double q);

/// μ(θx) on x = 0..L-1 (periodic, centred at 0), built from μ̂_∞(p/θ) on the (2π/L)ℤ grid so that
/// Σ_x θμ(θx) = μ̂_∞(0).
std::vector<double> periodized_bump(double theta, int L, const ProfileHat& mu_hat = mu_hat_bump);

struct PropagationResult {
  CMat delta_gamma;  // Γ(0) - Γ_eq, site basis
  double t0 = 0.0;
  double unitarity_defect = 0.0;
  double trace_drift = 0.0;     // |Tr ΔΓ|
  double spectrum_drift = 0.0;  // max |λ_i(Γ(0)) - λ_i(Γ_eq)|
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  MagnusStats stats;
};

struct DriveOptions {
  /// The ramp starts where e^{rate·t0}·max|V| equals this amplitude.
  double start_amplitude = 1e-8;
  double tol = 1e-12;
};

/// Start-amplitude setting for comparisons whose differences sit near 1e-8: the response to the
/// omitted part of the ramp is then far below them.
inline constexpr double kComparisonStartAmplitude = 1e-16;

struct AuxiliaryResult {
  double eta_beta;
  std::vector<double> full;
  std::vector<double> auxiliary;
  double max_deviation;
};

/// λ = 0 adiabatic evolution of the one-particle density matrix Γ_{uw} = ⟨a*_w a_u⟩ under
/// h + e^{rate·t} diag(V). Works in the Bloch basis and the interaction picture, where the
/// perturbation only couples momenta inside the support of its Fourier transform.
class QuasiFreeDynamics {
 public:
  QuasiFreeDynamics(BlochHamiltonian H, double mu, double beta, int L);

  const FreeTheory& free_theory() const { return ft_; }
  int L() const { return ft_.L(); }
  double beta() const { return ft_.beta(); }
  int dim() const { return static_cast<int>(eps_.size()); }

  CMat gamma_eq() const;

  /// Start time with e^{rate·t0}·max|V| = amplitude, clamped to [-60/rate, -1/rate].
  static double default_t0(double rate, std::span<const double> V, double amplitude = 1e-8);

  PropagationResult propagate(double rate, std::span<const double> V, double t0, double tol = 1e-12) const;

  /// (Tr j_{ν,x} Γ(0) - Tr j_{ν,x} Γ_eq)/θ per site, drive θμ(θx).
  std::vector<double> full_response(double eta, double theta, int nu, const ProfileHat& mu_hat = mu_hat_bump,
                                    const DriveOptions& opt = {}, PropagationResult* info = nullptr) const;

  /// Same pipeline with e^{η_β t}, η_β = smallest element of (2π/β)ℕ not below η.
  AuxiliaryResult auxiliary_response(double eta, double theta, int nu, const ProfileHat& mu_hat = mu_hat_bump,
                                     const DriveOptions& opt = {kComparisonStartAmplitude}) const;

  /// First Duhamel term per site, from the free bubble at frequency η.
  std::vector<double> linear_response(double eta, double theta, int nu, const ProfileHat& mu_hat = mu_hat_bump) const;

  /// First-order change of ⟨j_{ν,x}⟩ for the drive e^{ηt} diag(V), V = θμ(θx) or any real profile.
  std::vector<double> linear_shift(double eta, std::span<const double> V, int nu) const;

  /// Tr[j_{ν,x} ΔΓ] for every x.
  std::vector<double> current_profile(const CMat& delta_gamma, int nu) const;

 private:
  FreeTheory ft_;
  RVec eps_;  // ε_b(k_j) - μ, index j·M + b
  CMat B_;    // site ← Bloch
};

double matsubara_rate(double eta, double beta);

struct KuboScanRow {
  double eta;
  double theta;
  std::vector<double> chi_full;
  std::vector<double> chi_lin;
  double deviation;  // sup over sites
};

struct KuboComparison {
  double a;
  int nu;
  std::vector<KuboScanRow> rows;
  double gamma_hat;  // slope of log(deviation) against log(η)
  double gamma_stderr;
  bool monotone;  // deviation strictly decreasing as η decreases
};

/// Full vs linear response over a list of η at fixed a = θ/η. Scan points run concurrently.
KuboComparison kubo_comparison(const QuasiFreeDynamics& qf, std::span<const double> etas, double a, int nu,
                               const ProfileHat& mu_hat = mu_hat_bump,
                               const DriveOptions& opt = {kComparisonStartAmplitude});

}  // namespace kubo
