#include "kubo/adiabatic_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Sparse>

#include "kubo/errors.hpp"
#include "kubo/parallel.hpp"

namespace kubo {

double mu_hat_bump(double q) {
  const double s = 1.0 - q * q;
  return s > 0.0 ? std::exp(1.0 - 1.0 / s) : 0.0;
}

std::vector<double> periodized_bump(double theta, int L, const ProfileHat& mu_hat) {
  if (theta == 0.0) throw Error(ErrorCode::InvalidArgument, "theta must be nonzero");
  if (L < 1) throw Error(ErrorCode::InvalidArgument, "L must be positive");
  std::vector<cplx> hat(L);
  for (int j = 0; j < L; ++j) {
    const int jj = j <= L / 2 ? j : j - L;
    hat[j] = mu_hat(2.0 * pi * jj / L / theta);
  }
  std::vector<double> out(L);
  for (int x = 0; x < L; ++x) {
    cplx s = 0.0;
    for (int j = 0; j < L; ++j) s += hat[j] * std::exp(I * (2.0 * pi * double(j) * x / L));
    out[x] = s.real() / (theta * L);
  }
  return out;
}

double matsubara_rate(double eta, double beta) {
  if (eta <= 0 || beta <= 0) throw Error(ErrorCode::InvalidArgument, "need eta > 0 and beta > 0");
  const double w = 2.0 * pi / beta;
  const double x = eta / w;
  const double r = std::round(x);
  const double n = std::abs(x - r) < 1e-12 * std::max(1.0, x) ? r : std::ceil(x);
  return std::max(1.0, n) * w;
}

QuasiFreeDynamics::QuasiFreeDynamics(BlochHamiltonian H, double mu, double beta, int L)
    : ft_(std::move(H), mu, beta, L) {
  const int M = ft_.hamiltonian().dim();
  const int D = M * L;
  eps_.resize(D);
  B_ = CMat::Zero(D, D);
  for (int j = 0; j < L; ++j) {
    const double k = 2.0 * pi * j / L;
    const CMat& U = ft_.states(j);
    for (int b = 0; b < M; ++b) {
      eps_(j * M + b) = ft_.energies(j)(b) - mu;
      for (int x = 0; x < L; ++x)
        B_.block(x * M, j * M + b, M, 1) = U.col(b) * (std::exp(I * (k * x)) / std::sqrt(double(L)));
    }
  }
}

CMat QuasiFreeDynamics::gamma_eq() const {
  RVec f(dim());
  for (int c = 0; c < dim(); ++c) f(c) = fermi(beta(), eps_(c));
  return B_ * f.cast<cplx>().asDiagonal() * B_.adjoint();
}

double QuasiFreeDynamics::default_t0(double rate, std::span<const double> V, double amplitude) {
  double vmax = 0.0;
  for (double v : V) vmax = std::max(vmax, std::abs(v));
  const double logs = std::log(std::max(vmax / amplitude, 1e-300));
  return -std::clamp(logs, 1.0, 60.0) / rate;
}

PropagationResult QuasiFreeDynamics::propagate(double rate, std::span<const double> V, double t0,
                                               double tol) const {
  const int D = dim();
  const int M = ft_.hamiltonian().dim();
  if (static_cast<int>(V.size()) != L()) throw Error(ErrorCode::InvalidArgument, "profile length differs from L");
  if (rate <= 0) throw Error(ErrorCode::InvalidArgument, "rate must be positive");
  PropagationResult res;
  res.t0 = t0;
  res.delta_gamma = CMat::Zero(D, D);

  RVec Vsite(D);
  for (int x = 0; x < L(); ++x)
    for (int r = 0; r < M; ++r) Vsite(x * M + r) = V[x];
  const CMat Vd = B_.adjoint() * Vsite.cast<cplx>().asDiagonal() * B_;
  const double vmax = Vd.cwiseAbs().maxCoeff();
  if (vmax == 0.0) return res;
  // Entries at the rounding level of the basis change (~ε√D·vmax) are noise; keeping them makes a
  // band-limited drive dense.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::sqrt(double(D)) * vmax;
  std::vector<Eigen::Triplet<cplx>> trip;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b)
      if (std::abs(Vd(a, b)) > floor) trip.emplace_back(a, b, Vd(a, b));
  Eigen::SparseMatrix<cplx, Eigen::RowMajor> Vs(D, D);
  Vs.setFromTriplets(trip.begin(), trip.end());

  // Evolve whichever of the particle or hole columns is the smaller set.
  RVec f(D);
  for (int c = 0; c < D; ++c) f(c) = fermi(beta(), eps_(c));
  std::vector<int> part, hole;
  for (int c = 0; c < D; ++c) {
    if (f(c) > 1e-17) part.push_back(c);
    if (1.0 - f(c) > 1e-17) hole.push_back(c);
  }
  const bool use_part = part.size() <= hole.size();
  const auto& cols = use_part ? part : hole;
  const auto n = static_cast<Eigen::Index>(cols.size());
  CMat X0 = CMat::Zero(D, n);
  RVec w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X0(cols[i], i) = 1.0;
    w(i) = use_part ? f(cols[i]) : 1.0 - f(cols[i]);
  }

  using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  // The combined generator ca·A(ta) + cb·A(tb) is rebuilt only when the stepper moves to a new
  // exponential; all Taylor terms of that exponential reuse it.
  Eigen::SparseMatrix<cplx, Eigen::RowMajor> Gen = Vs;
  double last[4] = {std::nan(""), 0, 0, 0};
  GeneratorPair A = [&](double ta, double ca, double tb, double cb, const CMat& X, CMat& out) {
    if (!(ta == last[0] && ca == last[1] && tb == last[2] && cb == last[3])) {
      const CVec pa = (I * (ta * eps_.array())).exp().matrix();
      const CVec pb = (I * (tb * eps_.array())).exp().matrix();
      const double wa = ca * std::exp(rate * ta), wb = cb * std::exp(rate * tb);
      for (int r = 0; r < Gen.outerSize(); ++r) {
        Eigen::SparseMatrix<cplx, Eigen::RowMajor>::InnerIterator g(Gen, r);
        for (Eigen::SparseMatrix<cplx, Eigen::RowMajor>::InnerIterator v(Vs, r); v; ++v, ++g) {
          const auto c = v.col();
          g.valueRef() = v.value() * (wa * pa(r) * std::conj(pa(c)) + wb * pb(r) * std::conj(pb(c)));
        }
      }
      last[0] = ta, last[1] = ca, last[2] = tb, last[3] = cb;
    }
    RowMat Xr = X;
    RowMat Yr = Gen * Xr;
    out = Yr;
  };
  MagnusOptions opt;
  opt.tol = tol;
  opt.initial_step = 1.0 / (50.0 * rate);
  constexpr Eigen::Index kProbes = 16;
  if (n > 2 * kProbes)
    for (Eigen::Index i = 0; i < kProbes; ++i) opt.probe.push_back(i * (n - 1) / (kProbes - 1));
  const CMat X = n > 0 ? magnus_cf4(A, X0, t0, 0.0, opt, &res.stats) : X0;
  if (n > 0) res.unitarity_defect = unitarity_defect(X);
  if (res.unitarity_defect > 1e-10)
    throw Error(ErrorCode::StepControlFailure, "unitarity defect " + std::to_string(res.unitarity_defect));

  const CMat W = w.cast<cplx>().asDiagonal();
  CMat dG = X * W * X.adjoint() - X0 * W * X0.adjoint();
  if (!use_part) dG = -dG;
  res.trace_drift = std::abs(dG.trace());

  CMat G = dG;
  G.diagonal() += f.cast<cplx>();
  Eigen::SelfAdjointEigenSolver<CMat> es(G, Eigen::EigenvaluesOnly);
  RVec fs = f;
  std::sort(fs.begin(), fs.end());
  res.spectrum_drift = (es.eigenvalues() - fs).cwiseAbs().maxCoeff();
  res.min_eigenvalue = es.eigenvalues().minCoeff();
  res.max_eigenvalue = es.eigenvalues().maxCoeff();

  res.delta_gamma = B_ * dG * B_.adjoint();
  return res;
}

std::vector<double> QuasiFreeDynamics::current_profile(const CMat& dG, int nu) const {
  std::vector<double> out(L());
  parallel_for(static_cast<std::size_t>(L()), [&](std::size_t x) {
    const CMat C = observable_kernel(ft_.hamiltonian(), L(), nu, static_cast<int>(x));
    out[x] = (C.transpose().cwiseProduct(dG)).sum().real();
  });
  return out;
}

std::vector<double> QuasiFreeDynamics::full_response(double eta, double theta, int nu, const ProfileHat& mu_hat,
                                                     const DriveOptions& opt, PropagationResult* info) const {
  std::vector<double> V = periodized_bump(theta, L(), mu_hat);
  for (double& v : V) v *= theta;
  PropagationResult r = propagate(eta, V, default_t0(eta, V, opt.start_amplitude), opt.tol);
  std::vector<double> chi = current_profile(r.delta_gamma, nu);
  for (double& c : chi) c /= theta;
  if (info) *info = std::move(r);
  return chi;
}

AuxiliaryResult QuasiFreeDynamics::auxiliary_response(double eta, double theta, int nu, const ProfileHat& mu_hat,
                                                      const DriveOptions& opt) const {
  AuxiliaryResult out;
  out.eta_beta = matsubara_rate(eta, beta());
  out.full = full_response(eta, theta, nu, mu_hat, opt);
  out.auxiliary =
      std::abs(out.eta_beta - eta) < 1e-14 ? out.full : full_response(out.eta_beta, theta, nu, mu_hat, opt);
  out.max_deviation = 0.0;
  for (int x = 0; x < L(); ++x) out.max_deviation = std::max(out.max_deviation, std::abs(out.full[x] - out.auxiliary[x]));
  return out;
}

std::vector<double> QuasiFreeDynamics::linear_response(double eta, double theta, int nu,
                                                       const ProfileHat& mu_hat) const {
  std::vector<double> V = periodized_bump(theta, L(), mu_hat);
  for (double& v : V) v *= theta;
  std::vector<double> chi = linear_shift(eta, V, nu);
  for (double& c : chi) c /= theta;
  return chi;
}

std::vector<double> QuasiFreeDynamics::linear_shift(double eta, std::span<const double> V, int nu) const {
  const int L = this->L();
  if (static_cast<int>(V.size()) != L) throw Error(ErrorCode::InvalidArgument, "profile length differs from L");
  // V̂(p) = Σ_x e^{-ipx} V(x)
  std::vector<cplx> Vhat(L);
  double vmax = 0.0;
  for (int j = 0; j < L; ++j) {
    cplx s = 0.0;
    for (int x = 0; x < L; ++x) s += std::exp(-I * (2.0 * pi * double(j) * x / L)) * V[x];
    Vhat[j] = s;
    vmax = std::max(vmax, std::abs(s));
  }
  std::vector<cplx> bub(L, 0.0);
  parallel_for(static_cast<std::size_t>(L), [&](std::size_t j) {
    const int jm = (L - static_cast<int>(j)) % L;  // index of -p
    if (std::abs(Vhat[jm]) <= 1e-15 * vmax) return;
    bub[j] = ft_.density_current_bubble({eta, 2.0 * pi * double(j) / L}, nu);
  });
  std::vector<double> out(L);
  for (int x = 0; x < L; ++x) {
    cplx s = 0.0;
    for (int j = 0; j < L; ++j) {
      if (bub[j] == cplx(0.0)) continue;
      s += Vhat[(L - j) % L] * std::exp(-I * (2.0 * pi * double(j) * x / L)) * bub[j];
    }
    out[x] = -s.real() / L;
  }
  return out;
}

KuboComparison kubo_comparison(const QuasiFreeDynamics& qf, std::span<const double> etas, double a, int nu,
                               const ProfileHat& mu_hat, const DriveOptions& opt) {
  if (etas.empty()) throw Error(ErrorCode::InvalidArgument, "empty eta list");
  if (a <= 0) throw Error(ErrorCode::InvalidArgument, "a must be positive");
  KuboComparison out{a, nu, std::vector<KuboScanRow>(etas.size()), 0.0, 0.0, true};
  parallel_for(etas.size(), [&](std::size_t i) {
    KuboScanRow& r = out.rows[i];
    r.eta = etas[i];
    r.theta = a * etas[i];
    r.chi_full = qf.full_response(r.eta, r.theta, nu, mu_hat, opt);
    r.chi_lin = qf.linear_response(r.eta, r.theta, nu, mu_hat);
    r.deviation = 0.0;
    for (std::size_t x = 0; x < r.chi_full.size(); ++x)
      r.deviation = std::max(r.deviation, std::abs(r.chi_full[x] - r.chi_lin[x]));
  });
  std::vector<const KuboScanRow*> sorted;
  for (const auto& r : out.rows) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](auto* p, auto* q) { return p->eta > q->eta; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (!(sorted[i]->deviation < sorted[i - 1]->deviation)) out.monotone = false;
  if (out.rows.size() >= 2) {
    std::vector<double> lx, ly;
    for (const auto& r : out.rows) {
      lx.push_back(std::log(r.eta));
      ly.push_back(std::log(std::max(r.deviation, 1e-300)));
    }
    const LinearFit fit = least_squares(lx, ly);
    out.gamma_hat = fit.slope;
    out.gamma_stderr = fit.slope_stderr;
  }
  return out;
}

}  // namespace kubo
