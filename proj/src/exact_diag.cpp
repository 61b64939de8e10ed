#include "kubo/exact_diag.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include <unsupported/Eigen/MatrixFunctions>

#include "kubo/errors.hpp"
#include "kubo/magnus.hpp"

namespace kubo {

// ---------------------------------------------------------------- Fock space

FockSpace::FockSpace(int modes) : modes_(modes), states_(modes + 1) {
  if (modes < 1 || modes > 24) throw Error(ErrorCode::DimensionTooLarge, "modes = " + std::to_string(modes));
  for (std::uint32_t s = 0; s < (1u << modes); ++s) states_[std::popcount(s)].push_back(s);
  for (const auto& sec : states_)
    for (std::size_t i = 0; i < sec.size(); ++i) index_[sec[i]] = static_cast<int>(i);
}

namespace {

int jw_sign(std::uint32_t s, int m) { return (std::popcount(s & ((1u << m) - 1u)) & 1) ? -1 : 1; }

}  // namespace

BlockOp& BlockOp::operator+=(const BlockOp& o) {
  for (std::size_t n = 0; n < blocks.size(); ++n) blocks[n] += o.blocks[n];
  return *this;
}

BlockOp& BlockOp::operator-=(const BlockOp& o) {
  for (std::size_t n = 0; n < blocks.size(); ++n) blocks[n] -= o.blocks[n];
  return *this;
}

BlockOp& BlockOp::operator*=(cplx c) {
  for (auto& b : blocks) b *= c;
  return *this;
}

BlockOp operator*(const BlockOp& a, const BlockOp& b) {
  BlockOp r;
  r.blocks.reserve(a.blocks.size());
  for (std::size_t n = 0; n < a.blocks.size(); ++n) r.blocks.push_back(a.blocks[n] * b.blocks[n]);
  return r;
}

BlockOp BlockOp::adjoint() const {
  BlockOp r;
  for (const auto& b : blocks) r.blocks.push_back(b.adjoint());
  return r;
}

double BlockOp::norm() const {
  double n = 0.0;
  for (const auto& b : blocks) {
    if (b.size() == 0) continue;
    Eigen::BDCSVD<CMat> svd(b);
    n = std::max(n, svd.singularValues()(0));
  }
  return n;
}

BlockOp commutator(const BlockOp& a, const BlockOp& b) { return a * b - b * a; }

BlockOp bilinear(const FockSpace& F, const CMat& A) {
  const int modes = F.modes();
  if (A.rows() != modes || A.cols() != modes) throw Error(ErrorCode::InvalidArgument, "kernel size mismatch");
  std::vector<std::pair<int, int>> nz;
  for (int m = 0; m < modes; ++m)
    for (int n = 0; n < modes; ++n)
      if (A(m, n) != cplx(0.0)) nz.emplace_back(m, n);
  BlockOp op;
  for (int N = 0; N < F.sectors(); ++N) {
    const auto& st = F.states(N);
    CMat B = CMat::Zero(st.size(), st.size());
    for (std::size_t i = 0; i < st.size(); ++i) {
      const std::uint32_t s = st[i];
      for (auto [m, n] : nz) {
        if (!(s >> n & 1u)) continue;
        const std::uint32_t s1 = s ^ (1u << n);
        if (s1 >> m & 1u) continue;
        const std::uint32_t s2 = s1 | (1u << m);
        B(F.index(s2), i) += double(jw_sign(s, n) * jw_sign(s1, m)) * A(m, n);
      }
    }
    op.blocks.push_back(std::move(B));
  }
  return op;
}

CMat dense_annihilator(int modes, int m) {
  const std::uint32_t dim = 1u << modes;
  CMat a = CMat::Zero(dim, dim);
  for (std::uint32_t s = 0; s < dim; ++s)
    if (s >> m & 1u) a(s ^ (1u << m), s) = double(jw_sign(s, m));
  return a;
}

// ---------------------------------------------------------------- ensemble

ManyBodyEnsemble::ManyBodyEnsemble(const LatticeModel& model, int L, double beta, int max_modes)
    : model_(model), L_(L), beta_(beta), fock_([&] {
        const int modes = L * model.hopping.dim();
        if (modes > max_modes)
          throw Error(ErrorCode::DimensionTooLarge, "L*M = " + std::to_string(modes) + " exceeds the ED budget");
        return modes;
      }()) {
  const int M = model_.hopping.dim();
  const int modes = fock_.modes();
  CMat h = real_space_hamiltonian(model_.hopping, L) - model_.mu * CMat::Identity(modes, modes);
  K_site_ = bilinear(fock_, h);

  // λ Σ_{uv} (n_u - 1/2) w(x_u - x_v) (n_v - 1/2), w periodized over Γ_L.
  if (model_.lambda != 0.0) {
    RMat W = RMat::Zero(modes, modes);
    for (int u = 0; u < modes; ++u)
      for (int v = 0; v < modes; ++v) {
        const int d = (u / M - v / M + L) % L;
        double w = 0.0;
        const int R = model_.potential.range();
        for (int n = -(R / L) - 2; n <= (R / L) + 2; ++n) w += model_.potential(d + n * L);
        W(u, v) = w;
      }
    for (int N = 0; N < fock_.sectors(); ++N) {
      const auto& st = fock_.states(N);
      for (std::size_t i = 0; i < st.size(); ++i) {
        double e = 0.0;
        for (int u = 0; u < modes; ++u)
          for (int v = 0; v < modes; ++v)
            e += ((st[i] >> u & 1u) - 0.5) * W(u, v) * ((st[i] >> v & 1u) - 0.5);
        K_site_.blocks[N](i, i) += model_.lambda * e;
      }
    }
  }

  double kmin = std::numeric_limits<double>::infinity();
  for (int N = 0; N < fock_.sectors(); ++N) {
    Eigen::SelfAdjointEigenSolver<CMat> es(K_site_.blocks[N]);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::EigenSolverFailure, "sector " + std::to_string(N));
    E_.push_back(es.eigenvalues());
    V_.push_back(es.eigenvectors());
    residual_ = std::max(residual_, (K_site_.blocks[N] * V_[N] - V_[N] * E_[N].cast<cplx>().asDiagonal())
                                        .cwiseAbs()
                                        .maxCoeff());
    kmin = std::min(kmin, E_[N].minCoeff());
  }
  for (auto& e : E_) e.array() -= kmin;
  for (const auto& e : E_) {
    RVec w = (-beta_ * e.array()).exp();
    Z_ += w.sum();
    w_.push_back(std::move(w));
  }
  for (auto& w : w_) w /= Z_;
}

BlockOp ManyBodyEnsemble::to_eigenbasis(const BlockOp& site) const {
  BlockOp r;
  for (std::size_t N = 0; N < site.blocks.size(); ++N) r.blocks.push_back(V_[N].adjoint() * site.blocks[N] * V_[N]);
  return r;
}

BlockOp ManyBodyEnsemble::to_site_basis(const BlockOp& eig) const {
  BlockOp r;
  for (std::size_t N = 0; N < eig.blocks.size(); ++N) r.blocks.push_back(V_[N] * eig.blocks[N] * V_[N].adjoint());
  return r;
}

BlockOp ManyBodyEnsemble::number() const {
  return bilinear(fock_, CMat::Identity(fock_.modes(), fock_.modes()));
}

BlockOp ManyBodyEnsemble::density(int x) const { return observable(0, x); }

BlockOp ManyBodyEnsemble::observable(int nu, int x) const {
  return bilinear(fock_, observable_kernel(model_.hopping, L_, nu, x));
}

BlockOp ManyBodyEnsemble::fourier_observable(int nu, double p) const {
  const int modes = fock_.modes();
  CMat C = CMat::Zero(modes, modes);
  for (int x = 0; x < L_; ++x) C += std::exp(-I * (p * x)) * observable_kernel(model_.hopping, L_, nu, x);
  return bilinear(fock_, C);
}

cplx ManyBodyEnsemble::expectation(const BlockOp& site) const {
  cplx s = 0.0;
  for (std::size_t N = 0; N < site.blocks.size(); ++N) {
    const CMat D = V_[N].adjoint() * site.blocks[N] * V_[N];
    for (Eigen::Index a = 0; a < D.rows(); ++a) s += w_[N](a) * D(a, a);
  }
  return s;
}

// ---------------------------------------------------------------- Euclidean correlators

namespace {

// All set partitions of {0..n-1}, as lists of index blocks.
std::vector<std::vector<std::vector<int>>> set_partitions(int n) {
  std::vector<std::vector<std::vector<int>>> out;
  std::vector<int> label(n, 0);
  std::function<void(int, int)> rec = [&](int i, int nblocks) {
    if (i == n) {
      std::vector<std::vector<int>> p(nblocks);
      for (int j = 0; j < n; ++j) p[label[j]].push_back(j);
      out.push_back(std::move(p));
      return;
    }
    for (int b = 0; b <= nblocks; ++b) {
      label[i] = b;
      rec(i + 1, std::max(nblocks, b + 1));
    }
  };
  rec(0, 0);
  return out;
}

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Möbius inversion: cumulant from a subset-moment functional.
cplx cumulant_from_moments(int n, const std::function<cplx(const std::vector<int>&)>& moment) {
  std::map<std::vector<int>, cplx> memo;
  auto get = [&](const std::vector<int>& B) {
    auto it = memo.find(B);
    if (it != memo.end()) return it->second;
    const cplx v = moment(B);
    memo.emplace(B, v);
    return v;
  };
  cplx total = 0.0;
  for (const auto& part : set_partitions(n)) {
    const int k = static_cast<int>(part.size());
    cplx prod = ((k - 1) % 2 ? -1.0 : 1.0) * factorial(k - 1);
    for (const auto& B : part) prod *= get(B);
    total += prod;
  }
  return total;
}

// ∫_{h ≥ 0, Σh = β} exp(-Σ h_l z_l).
cplx simplex_integral(double beta, std::span<const cplx> z) {
  const auto n = static_cast<Eigen::Index>(z.size());
  if (n == 1) return std::exp(-beta * z[0]);
  if (n == 2) {
    const cplx u = beta * (z[0] - z[1]);
    if (std::abs(u) < 1e-3)
      return beta * std::exp(-beta * z[0]) * (1.0 + u / 2.0 + u * u / 6.0 + u * u * u / 24.0 + u * u * u * u / 120.0);
    return (std::exp(-beta * z[1]) - std::exp(-beta * z[0])) / (z[0] - z[1]);
  }
  CMat Z = CMat::Zero(n, n);
  for (Eigen::Index l = 0; l < n; ++l) {
    Z(l, l) = -beta * z[l];
    if (l + 1 < n) Z(l, l + 1) = -beta;
  }
  const CMat E = Z.exp();
  return ((n - 1) % 2 ? -1.0 : 1.0) * E(0, n - 1);
}

// Time-integrated moment of ops[B] with the last member of B held at time 0 and the others
// integrated over [0, β) with weights e^{-i q s}. Operators in the eigenbasis.
cplx anchored_moment(const ManyBodyEnsemble& ens, std::span<const BlockOp> ops, std::span<const double> q,
                     const std::vector<int>& B) {
  const int n = static_cast<int>(B.size());
  const int anchor = B.back();
  const double beta = ens.beta();
  cplx total = 0.0;
  if (n == 1) {
    for (int N = 0; N < ens.fock().sectors(); ++N) {
      const auto& w = ens.weights(N);
      for (Eigen::Index a = 0; a < w.size(); ++a) total += w(a) * ops[anchor].blocks[N](a, a);
    }
    return total;
  }
  std::vector<int> free(B.begin(), B.end() - 1);
  std::sort(free.begin(), free.end());
  do {
    std::vector<double> Q(n, 0.0);
    for (int l = 1; l < n; ++l) Q[l] = Q[l - 1] + q[free[l - 1]];
    for (int N = 0; N < ens.fock().sectors(); ++N) {
      const RVec& E = ens.energies(N);
      const auto d = E.size();
      if (d == 0) continue;
      std::vector<Eigen::Index> a(n, 0);
      std::vector<cplx> z(n);
      // Depth-first over eigenstate tuples a_0..a_{n-1}, accumulating matrix elements.
      std::function<void(int, cplx)> rec = [&](int l, cplx amp) {
        if (l == n) {
          const cplx closing = ops[anchor].blocks[N](a[n - 1], a[0]);
          if (closing == cplx(0.0)) return;
          for (int j = 0; j < n; ++j) z[j] = cplx(E(a[j]), Q[j]);
          total += amp * closing * simplex_integral(beta, z);
          return;
        }
        for (Eigen::Index s = 0; s < d; ++s) {
          a[l] = s;
          if (l == 0) {
            rec(1, 1.0);
            continue;
          }
          const cplx el = ops[free[l - 1]].blocks[N](a[l - 1], s);
          if (el == cplx(0.0)) continue;
          rec(l + 1, amp * el);
        }
      };
      rec(0, 1.0);
    }
  } while (std::next_permutation(free.begin(), free.end()));
  return total / ens.partition_shifted();
}

}  // namespace

cplx euclidean_moment(const ManyBodyEnsemble& ens, std::span<const BlockOp> ops, std::span<const double> times) {
  const double beta = ens.beta();
  const auto n = ops.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = std::fmod(times[i], beta);
    if (t[i] < 0) t[i] += beta;
  }
  std::vector<std::size_t> ord(n);
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(), [&](auto a, auto b) { return t[a] > t[b]; });
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(t[ord[i - 1]] - t[ord[i]]) < 1e-14)
      throw Error(ErrorCode::CoincidentTimes, "time-ordered product needs distinct times");
  cplx total = 0.0;
  for (int N = 0; N < ens.fock().sectors(); ++N) {
    const RVec& E = ens.energies(N);
    if (E.size() == 0) continue;
    auto D = [&](double h) { return CVec((-h * E.array()).exp().cast<cplx>()); };
    double prev = beta;
    CMat X = CMat::Identity(E.size(), E.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double ti = t[ord[i]];
      X = X * D(prev - ti).asDiagonal();
      X = X * ops[ord[i]].blocks[N];
      prev = ti;
    }
    X = X * D(prev).asDiagonal();
    total += X.trace();
  }
  return total / ens.partition_shifted();
}

cplx euclidean_cumulant(const ManyBodyEnsemble& ens, std::span<const BlockOp> ops, std::span<const double> times) {
  const int n = static_cast<int>(ops.size());
  return cumulant_from_moments(n, [&](const std::vector<int>& B) {
    std::vector<BlockOp> sub;
    std::vector<double> ts;
    for (int i : B) {
      sub.push_back(ops[i]);
      ts.push_back(times[i]);
    }
    return euclidean_moment(ens, sub, ts);
  });
}

cplx integrated_cumulant(const ManyBodyEnsemble& ens, std::span<const BlockOp> ops, std::span<const double> q,
                         bool anchor_last) {
  const int n = static_cast<int>(ops.size());
  const double beta = ens.beta();
  const double spacing = 2.0 * pi / beta;
  for (int i = 0; i < n; ++i) {
    const double x = q[i] / spacing;
    if (std::abs(x - std::round(x)) > 1e-9 && !(anchor_last && i == n - 1))
      throw Error(ErrorCode::InvalidArgument, "integrated correlators need bosonic frequencies");
  }
  return cumulant_from_moments(n, [&](const std::vector<int>& B) -> cplx {
    if (anchor_last && B.back() == n - 1) return anchored_moment(ens, ops, q, B);
    double Q = 0.0;
    for (int i : B) Q += q[i];
    if (std::abs(Q) > 1e-9 * spacing) return 0.0;
    return beta * anchored_moment(ens, ops, q, B);
  });
}

double kms_check(const ManyBodyEnsemble& ens, const BlockOp& A_site, const BlockOp& B_site, double t, double s) {
  const BlockOp A = ens.to_eigenbasis(A_site);
  const BlockOp B = ens.to_eigenbasis(B_site);
  const double beta = ens.beta();
  cplx lhs = 0.0, rhs = 0.0;
  for (int N = 0; N < ens.fock().sectors(); ++N) {
    const RVec& E = ens.energies(N);
    for (Eigen::Index a = 0; a < E.size(); ++a)
      for (Eigen::Index b = 0; b < E.size(); ++b) {
        const double dE = E(a) - E(b);
        lhs += std::exp(-beta * E(a) + (t - s) * dE) * A.blocks[N](a, b) * B.blocks[N](b, a);
        rhs += std::exp(-beta * E(a) + (s + beta - t) * dE) * B.blocks[N](a, b) * A.blocks[N](b, a);
      }
  }
  return std::abs(lhs - rhs) / ens.partition_shifted();
}

WickRotationResult wick_rotation_check(const ManyBodyEnsemble& ens, int n, const BlockOp& O_site,
                                       const BlockOp& P_site, double eta, double t) {
  const double beta = ens.beta();
  const double x = eta * beta / (2.0 * pi);
  if (!(x > 0.5) || std::abs(x - std::round(x)) > 1e-9)
    throw Error(ErrorCode::EtaNotMatsubara, "eta_beta * beta / 2pi = " + std::to_string(x));
  const BlockOp O = ens.to_eigenbasis(O_site);
  const BlockOp P = ens.to_eigenbasis(P_site);
  WickRotationResult r{};
  if (n == 1) {
    cplx lhs = 0.0;
    for (int N = 0; N < ens.fock().sectors(); ++N) {
      const RVec& E = ens.energies(N);
      const RVec& w = ens.weights(N);
      for (Eigen::Index a = 0; a < E.size(); ++a)
        for (Eigen::Index b = 0; b < E.size(); ++b)
          lhs += (w(a) - w(b)) * O.blocks[N](a, b) * P.blocks[N](b, a) / cplx(eta, -(E(a) - E(b)));
    }
    r.lhs = std::exp(eta * t) * lhs;
    const std::vector<BlockOp> ops{P, O};
    const std::vector<double> q{eta, 0.0};
    r.rhs = -I * std::exp(eta * t) * integrated_cumulant(ens, ops, q, true);
  } else if (n == 2) {
    // [[O, P1], P2] = O P1 P2 - P1 O P2 - P2 O P1 + P2 P1 O, with O at 0, P1 at s1, P2 at s2.
    cplx lhs = 0.0;
    for (int N = 0; N < ens.fock().sectors(); ++N) {
      const RVec& E = ens.energies(N);
      const RVec& w = ens.weights(N);
      const CMat& o = O.blocks[N];
      const CMat& p = P.blocks[N];
      const auto d = E.size();
      auto kern = [&](double alpha, double gamma) { return 1.0 / (cplx(eta, gamma) * cplx(2.0 * eta, alpha + gamma)); };
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b)
          for (Eigen::Index c = 0; c < d; ++c) {
            const double dab = E(a) - E(b), dbc = E(b) - E(c), dca = E(c) - E(a);
            cplx s = o(a, b) * p(b, c) * p(c, a) * kern(dbc, dca);
            s -= p(a, b) * o(b, c) * p(c, a) * kern(dab, dca);
            s -= p(a, b) * o(b, c) * p(c, a) * kern(dca, dab);
            s += p(a, b) * p(b, c) * o(c, a) * kern(dbc, dab);
            lhs += w(a) * s;
          }
    }
    r.lhs = std::exp(2.0 * eta * t) * lhs;
    const std::vector<BlockOp> ops{P, P, O};
    const std::vector<double> q{eta, eta, 0.0};
    r.rhs = -0.5 * std::exp(2.0 * eta * t) * integrated_cumulant(ens, ops, q, true);
  } else {
    throw Error(ErrorCode::InvalidArgument, "Wick rotation check implemented for n = 1, 2");
  }
  r.residual = std::abs(r.lhs - r.rhs);
  return r;
}

double continuity_check(const ManyBodyEnsemble& ens, int x) {
  const int L = ens.L();
  BlockOp R = I * commutator(ens.hamiltonian(), ens.density(x));
  R += ens.observable(1, x);
  R -= ens.observable(1, (x - 1 + L) % L);
  return R.norm();
}

cplx ward_p0_value(const ManyBodyEnsemble& ens, double p0, int nu) {
  const std::vector<BlockOp> ops{ens.to_eigenbasis(ens.number()), ens.to_eigenbasis(ens.fourier_observable(nu, 0.0))};
  const std::vector<double> q{p0, -p0};
  return integrated_cumulant(ens, ops, q, false) / (ens.beta() * ens.L());
}

cplx fourier_correlator(const ManyBodyEnsemble& ens, std::span<const Momentum2> p, int nu) {
  std::vector<BlockOp> ops;
  std::vector<double> q;
  Momentum2 last{0, 0};
  for (const auto& pi_ : p) {
    ops.push_back(ens.to_eigenbasis(ens.fourier_observable(0, pi_.k1)));
    q.push_back(pi_.k0);
    last = last - pi_;
  }
  ops.push_back(ens.to_eigenbasis(ens.fourier_observable(nu, last.k1)));
  q.push_back(last.k0);
  return integrated_cumulant(ens, ops, q, false) / (ens.beta() * ens.L());
}

SmallResponse full_response_small(const ManyBodyEnsemble& ens, double eta, double theta, std::span<const double> V,
                                  int nu, double t0, double tol) {
  const int L = ens.L();
  const int M = ens.model().hopping.dim();
  if (static_cast<int>(V.size()) != L) throw Error(ErrorCode::InvalidArgument, "profile length differs from L");
  if (L * M > 10) throw Error(ErrorCode::DimensionTooLarge, "full_response_small needs L*M <= 10");
  SmallResponse out;
  out.t0 = t0;
  out.chi.assign(L, 0.0);
  if (theta == 0.0) return out;

  CMat Pk = CMat::Zero(L * M, L * M);
  for (int x = 0; x < L; ++x)
    for (int r = 0; r < M; ++r) Pk(x * M + r, x * M + r) = V[x];
  const BlockOp P = ens.to_eigenbasis(ens.one_body(Pk));
  std::vector<BlockOp> J;
  for (int x = 0; x < L; ++x) J.push_back(ens.to_eigenbasis(ens.observable(nu, x)));

  MagnusOptions opt;
  opt.tol = tol;
  opt.initial_step = 1.0 / (50.0 * eta);
  for (int N = 0; N < ens.fock().sectors(); ++N) {
    const RVec& E = ens.energies(N);
    const RVec& w = ens.weights(N);
    const auto d = E.size();
    if (d == 0 || w.sum() < 1e-300) continue;
    const CMat& p = P.blocks[N];
    GeneratorPair A = [&](double ta, double ca, double tb, double cb, const CMat& X, CMat& out_) {
      CMat G(d, d);
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) {
          const double dE = E(a) - E(b);
          G(a, b) = p(a, b) * (ca * std::exp(eta * ta) * std::exp(I * (dE * ta)) +
                               cb * std::exp(eta * tb) * std::exp(I * (dE * tb)));
        }
      out_ = G * X;
    };
    const CMat U = magnus_cf4(A, CMat::Identity(d, d), t0, 0.0, opt);
    out.unitarity_defect = std::max(out.unitarity_defect, unitarity_defect(U));
    const CMat drho = U * w.cast<cplx>().asDiagonal() * U.adjoint() - CMat(w.cast<cplx>().asDiagonal());
    for (int x = 0; x < L; ++x) out.chi[x] += (J[x].blocks[N] * drho).trace().real() / theta;
  }
  if (out.unitarity_defect > 1e-8)
    throw Error(ErrorCode::StepControlFailure, "unitarity defect " + std::to_string(out.unitarity_defect));
  return out;
}

}  // namespace kubo
