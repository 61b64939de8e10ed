#include "kubo/free_theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "kubo/errors.hpp"
#include "kubo/parallel.hpp"

namespace kubo {

long MatsubaraGrid::n_max() const {
  return static_cast<long>(std::floor(std::ldexp(1.0, N0) / spacing() + 0.5));
}

bool MatsubaraGrid::is_bosonic(double p0, double tol) const {
  const double x = p0 / spacing();
  return std::abs(x - std::round(x)) < tol;
}

bool MatsubaraGrid::on_lattice(double p1, double tol) const {
  const double x = p1 * L / (2.0 * pi);
  return std::abs(x - std::round(x)) < tol;
}

FreeTheory::FreeTheory(BlochHamiltonian H, double mu, double beta, int L)
    : H_(std::move(H)), mu_(mu), beta_(beta), L_(L) {
  if (L < 1 || beta <= 0) throw Error(ErrorCode::InvalidArgument, "need L >= 1 and beta > 0");
  std::vector<double> grid(L);
  for (int j = 0; j < L; ++j) grid[j] = 2.0 * pi * j / L;
  bands_ = band_structure(H_, grid);
  double lo = 1e300, hi = -1e300;
  for (const auto& b : bands_) {
    lo = std::min(lo, b.energies.minCoeff() - mu_);
    hi = std::max(hi, b.energies.maxCoeff() - mu_);
  }
  bandwidth_ = std::max(std::abs(lo), std::abs(hi));
}

int FreeTheory::lattice_index(double p1) const {
  const double x = p1 * L_ / (2.0 * pi);
  const double r = std::round(x);
  if (std::abs(x - r) > 1e-9) throw Error(ErrorCode::InvalidArgument, "spatial momentum not in (2π/L)Z");
  return static_cast<int>(r);
}

CMat FreeTheory::propagator(double k0, double k1) const {
  const CMat A = I * k0 * CMat::Identity(H_.dim(), H_.dim()) + bloch_matrix(H_, k1) -
                 mu_ * CMat::Identity(H_.dim(), H_.dim());
  Eigen::JacobiSVD<CMat> svd(A);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) == 0.0 || s(0) / s(s.size() - 1) > 1e14)
    throw Error(ErrorCode::SingularPropagator, "at (" + std::to_string(k0) + ", " + std::to_string(k1) + ")");
  return A.inverse();
}

namespace {

// (f(ξb) - f(ξa)) / (ξb - ξa + i p0), with the static limit -f' at coincidence.
cplx lindhard_weight(double beta, double xa, double xb, double p0) {
  const double d = xb - xa;
  if (p0 == 0.0 && std::abs(beta * d) < 1e-5) return -fermi_slope(beta, 0.5 * (xa + xb));
  return (fermi(beta, xb) - fermi(beta, xa)) / cplx(d, p0);
}

}  // namespace

cplx FreeTheory::density_current_bubble(Momentum2 p, int nu) const {
  const int s = lattice_index(p.k1);
  const int M = H_.dim();
  auto term = [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    const double k = 2.0 * pi * j / L_;
    const CMat& Ua = states(j - s);
    const CMat& Ub = states(j);
    const RVec& ea = energies(j - s);
    const RVec& eb = energies(j);
    const CMat J = current_vertex(H_, nu, k - p.k1, -p.k1);
    const CMat A = Ub.adjoint() * J * Ua;  // (b, a)
    const CMat B = Ua.adjoint() * Ub;      // (a, b)
    cplx acc = 0.0;
    for (int a = 0; a < M; ++a)
      for (int b = 0; b < M; ++b)
        acc += A(b, a) * B(a, b) * lindhard_weight(beta_, ea(a) - mu_, eb(b) - mu_, p.k0);
    return acc;
  };
  return -chunked_sum<cplx>(static_cast<std::size_t>(L_), term, 64) / double(L_);
}

int FreeTheory::default_N0(std::span<const Momentum2> p) const {
  double scale = bandwidth_;
  double tot = 0.0;
  for (const auto& q : p) {
    scale = std::max(scale, std::abs(q.k0));
    tot += q.k0;
  }
  scale = std::max(scale, std::abs(tot));
  return std::max(1, static_cast<int>(std::ceil(std::log2(100.0 * scale))));
}

namespace {

// Σ_{j ≥ J} (j + 1/2)^{-n}, midpoint Euler–Maclaurin.
double midpoint_tail(long J, int n) {
  const double x = double(J);
  return std::pow(x, 1 - n) / (n - 1) - n * std::pow(x, -n - 1) / 24.0 +
         7.0 * n * (n + 1) * (n + 2) * std::pow(x, -n - 3) / 5760.0;
}

// Σ over discarded fermionic k0 of (i k0)^{-n}.
cplx frequency_tail(double spacing, long nmax, int n) {
  if (n % 2 != 0) return 0.0;
  const double s = 2.0 * std::pow(spacing, -n) * midpoint_tail(nmax, n);
  return (n % 4 == 0) ? cplx(s) : cplx(-s);
}

}  // namespace

LoopResult FreeTheory::m_point_density_loop(std::span<const Momentum2> p_in, int nu, int N0) const {
  const int m = static_cast<int>(p_in.size()) + 1;
  if (m < 3) throw Error(ErrorCode::InvalidArgument, "m-point loops need m >= 3");
  std::vector<Momentum2> p(p_in.begin(), p_in.end());
  Momentum2 last{0, 0};
  for (const auto& q : p) last = last - q;
  p.push_back(last);

  MatsubaraGrid grid{beta_, L_, 0};
  std::vector<int> shift(m);
  for (int i = 0; i < m; ++i) {
    if (!grid.is_bosonic(p[i].k0)) throw Error(ErrorCode::InvalidArgument, "p0 must be a bosonic frequency");
    shift[i] = lattice_index(p[i].k1);
  }
  grid.N0 = N0 >= 0 ? N0 : default_N0(p);
  const long nmax = grid.n_max();
  const int M = H_.dim();

  // Cyclic orderings: insertion 0 first, the rest permuted.
  std::vector<std::vector<int>> orders;
  std::vector<int> rest(m - 1);
  std::iota(rest.begin(), rest.end(), 1);
  do {
    std::vector<int> o{0};
    o.insert(o.end(), rest.begin(), rest.end());
    orders.push_back(std::move(o));
  } while (std::next_permutation(rest.begin(), rest.end()));

  struct Leg {
    int kshift;      // spatial index offset of K_t relative to k
    double fshift;   // frequency offset of K_t relative to k0
    int insertion;   // vertex applied after g(K_t)
  };
  std::vector<std::vector<Leg>> legs;
  for (const auto& o : orders) {
    std::vector<Leg> l;
    int ks = 0;
    double fs = 0.0;
    for (int t = 0; t < m; ++t) {
      l.push_back({ks, fs, o[t]});
      ks -= shift[o[t]];
      fs -= p[o[t]].k0;
    }
    legs.push_back(std::move(l));
  }

  const double sp = grid.spacing();
  std::array<cplx, 3> S{frequency_tail(sp, nmax, m), frequency_tail(sp, nmax, m + 1),
                        frequency_tail(sp, nmax, m + 2)};

  // Per-ordering sums, so the tail can be judged against the size of each ordering.
  struct Acc {
    std::vector<cplx> value, tail;
    Acc& operator+=(const Acc& o) {
      if (value.empty()) {
        value.assign(o.value.size(), 0.0);
        tail.assign(o.tail.size(), 0.0);
      }
      for (std::size_t i = 0; i < o.value.size(); ++i) {
        value[i] += o.value[i];
        tail[i] += o.tail[i];
      }
      return *this;
    }
  };

  auto per_k1 = [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    Acc acc{std::vector<cplx>(legs.size(), 0.0), std::vector<cplx>(legs.size(), 0.0)};
    for (std::size_t oi = 0; oi < legs.size(); ++oi) {
      const auto& l = legs[oi];
      std::vector<CMat> V(m);
      std::vector<const RVec*> xi(m);
      std::vector<const CMat*> U(m);
      for (int t = 0; t < m; ++t) {
        const int kt = j + l[t].kshift;
        const double k1 = 2.0 * pi * kt / L_;
        const int ins = l[t].insertion;
        V[t] = current_vertex(H_, ins == m - 1 ? nu : 0, k1, p[ins].k1);
        xi[t] = &energies(kt);
        U[t] = &states(kt);
      }
      // Asymptotic coefficients of the loop integrand in z = 1/(i k0).
      std::array<CMat, 3> ser{CMat::Identity(M, M), CMat::Zero(M, M), CMat::Zero(M, M)};
      for (int t = 0; t < m; ++t) {
        const CMat b = (*U[t]) * ((xi[t]->array() - mu_).matrix().cast<cplx>().asDiagonal()) * U[t]->adjoint() +
                       I * l[t].fshift * CMat::Identity(M, M);
        const std::array<CMat, 3> g{CMat::Identity(M, M), CMat(-b), CMat(b * b)};
        std::array<CMat, 3> next{CMat::Zero(M, M), CMat::Zero(M, M), CMat::Zero(M, M)};
        for (int r = 0; r < 3; ++r)
          for (int s = 0; r + s < 3; ++s) next[r + s] += V[t] * g[s] * ser[r];
        ser = next;
      }
      for (int r = 0; r < 3; ++r) acc.tail[oi] += ser[r].trace() * S[r];

      if (M == 1) {
        cplx vprod = 1.0;
        for (int t = 0; t < m; ++t) vprod *= V[t](0, 0);
        std::vector<double> e(m);
        for (int t = 0; t < m; ++t) e[t] = (*xi[t])(0) - mu_;
        cplx sum = 0.0;
        for (long n = -nmax; n < nmax; ++n) {
          const double k0 = sp * (double(n) + 0.5);
          cplx den = 1.0;
          for (int t = 0; t < m; ++t) den *= cplx(e[t], k0 + l[t].fshift);
          sum += 1.0 / den;
        }
        acc.value[oi] += vprod * sum;
      } else {
        std::vector<CMat> VU(m), Ud(m);
        for (int t = 0; t < m; ++t) {
          Ud[t] = U[t]->adjoint();
          VU[t] = V[t] * (*U[t]);
        }
        cplx sum = 0.0;
        for (long n = -nmax; n < nmax; ++n) {
          const double k0 = sp * (double(n) + 0.5);
          CMat X = CMat::Identity(M, M);
          for (int t = 0; t < m; ++t) {
            CVec d(M);
            for (int a = 0; a < M; ++a) d(a) = 1.0 / cplx((*xi[t])(a) - mu_, k0 + l[t].fshift);
            X = VU[t] * d.asDiagonal() * (Ud[t] * X);
          }
          sum += X.trace();
        }
        acc.value[oi] += sum;
      }
    }
    return acc;
  };

  Acc total = chunked_sum<Acc>(static_cast<std::size_t>(L_), per_k1, 8);
  const double norm = -1.0 / (beta_ * L_);
  LoopResult r{0.0, 0.0, grid.N0};
  double scale = 0.0, worst_tail = 0.0;
  for (std::size_t o = 0; o < legs.size(); ++o) {
    r.value += norm * (total.value[o] + total.tail[o]);
    r.tail += norm * total.tail[o];
    scale = std::max(scale, std::abs(norm * (total.value[o] + total.tail[o])));
    worst_tail = std::max(worst_tail, std::abs(norm * total.tail[o]));
  }
  // Orderings can cancel down to roundoff (e.g. by particle-hole symmetry), so the tail is judged
  // against the larger of the total and the individual orderings.
  if (worst_tail > 0.1 * std::max(std::abs(r.value), scale))
    throw Error(ErrorCode::CutoffTooLow, fmt::format("tail {:.3e} vs value {:.3e}", worst_tail, std::abs(r.value)));
  return r;
}

cplx wick_determinant(const FreeTheory& ft, std::span<const FieldLabel> minus, std::span<const FieldLabel> plus) {
  if (minus.size() != plus.size())
    throw Error(ErrorCode::InvalidArgument, "unequal numbers of + and - fields");
  const auto n = static_cast<Eigen::Index>(minus.size());
  if (n == 0) return 1.0;
  const double bl = ft.beta() * ft.L();
  CMat K = CMat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& a = minus[i];
      const auto& b = plus[j];
      if (std::abs(a.k.k0 - b.k.k0) > 1e-12 || std::abs(wrap_angle(a.k.k1 - b.k.k1)) > 1e-12) continue;
      K(i, j) = bl * ft.propagator(a.k.k0, a.k.k1)(a.rho, b.rho);
    }
  return K.fullPivLu().determinant();
}

}  // namespace kubo
