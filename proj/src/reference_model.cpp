#include "kubo/reference_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "kubo/errors.hpp"
#include "kubo/fit.hpp"
#include "kubo/parallel.hpp"

namespace kubo {

double cutoff(double t) {
  const double a = std::abs(t);
  if (a <= 1.0) return 1.0;
  if (a >= 1.5) return 0.0;
  // f(1.5-a)/(f(1.5-a)+f(a-1)) with f(s) = e^{-1/s}, as a logistic.
  return 1.0 / (1.0 + std::exp(1.0 / (1.5 - a) - 1.0 / (a - 1.0)));
}

double ChiralPropagator::chi(Momentum2 k) const {
  const double R = std::ldexp(1.0, N);
  if (shape == CutoffShape::Radial) return cutoff(norm(k) / R);
  return cutoff(k.k0 / R) * cutoff(2.0 * v * k.k1 / R);
}

cplx ChiralPropagator::operator()(Momentum2 k) const {
  const double c = chi(k);
  return c == 0.0 ? cplx(0.0) : c / (Z * D(k));
}

void ReferenceGrid::check(Momentum2 p, int N) const {
  const double s = spacing();
  for (double c : {p.k0, p.k1}) {
    const double x = c / s;
    if (std::abs(x - std::round(x)) > 1e-9)
      throw Error(ErrorCode::GridTooCoarse, "external momentum is not on the bosonic grid of beta = " +
                                                std::to_string(beta));
  }
  const double across = 0.5 * std::ldexp(1.0, N) / s;
  if (across < 64.0)
    throw Error(ErrorCode::GridTooCoarse, std::to_string(across) + " points across the shell at N = " +
                                              std::to_string(N));
}

ReferenceGrid ReferenceGrid::for_scale(double base, int N) {
  const double need = 64.0 * 2.0 * pi / (0.5 * std::ldexp(1.0, N) * base);
  return {base * std::max(1.0, std::ceil(need - 1e-12))};
}

cplx delta_gg_raw(const ChiralPropagator& g, Momentum2 k, Momentum2 p) {
  const Momentum2 kp = k - p;
  const cplx delta = g.Z * (-g.D(kp) / g.chi(kp) + g.D(k) / g.chi(k) + g.D(p));
  return delta * g(kp) * g(k);
}

cplx delta_gg(const ChiralPropagator& g, Momentum2 k, Momentum2 p) {
  const Momentum2 kp = k - p;
  const double ck = g.chi(k), ckp = g.chi(kp);
  return (ckp * (1.0 + ck) / g.D(kp) - ck * (1.0 + ckp) / g.D(k)) / g.Z;
}

cplx anomalous_bubble_N(const ChiralPropagator& g, Momentum2 p, const ReferenceGrid& grid) {
  if (p.k0 == 0.0 && p.k1 == 0.0) throw Error(ErrorCode::InvalidArgument, "p must be nonzero");
  grid.check(p, g.N);
  const double s = grid.spacing();
  const double R = std::ldexp(1.0, g.N);
  const double outer = 1.5 * R;
  const double inner = g.shape == CutoffShape::Radial ? std::max(0.0, R - g.norm(p)) : 0.0;
  const long nrow = static_cast<long>(std::ceil(outer / s));
  const double av = std::abs(g.v);
  // Σ_k χ(k)[χ(k+p) - χ(k-p)]/D(k): zero unless k sits in the shell widened by p.
  auto row = [&](std::size_t r) {
    const double k0 = s * (double(static_cast<long>(r) - nrow) + 0.5);
    cplx acc = 0.0;
    const double hi2 = outer * outer - k0 * k0;
    if (hi2 <= 0) return acc;
    const double k1hi = g.shape == CutoffShape::Radial ? std::sqrt(hi2) / av : 0.75 * R / av;
    const double k1lo = (g.shape == CutoffShape::Radial && inner * inner > k0 * k0)
                            ? std::sqrt(inner * inner - k0 * k0) / av
                            : 0.0;
    const long jlo = static_cast<long>(std::floor(k1lo / s - 0.5));
    const long jhi = static_cast<long>(std::ceil(k1hi / s + 0.5));
    for (int sign : {1, -1})
      for (long j = std::max(0L, jlo); j <= jhi; ++j) {
        const Momentum2 k{k0, sign * s * (double(j) + 0.5)};
        const double ck = g.chi(k);
        if (ck == 0.0) continue;
        const double d = g.chi(k + p) - g.chi(k - p);
        if (d != 0.0) acc += ck * d / g.D(k);
      }
    return acc;
  };
  const cplx S = chunked_sum<cplx>(static_cast<std::size_t>(2 * nrow), row, 16);
  return -S / (grid.beta * grid.beta * g.D(p));
}

cplx bubble_closed_form(Momentum2 p, double v) {
  if (p.k0 == 0.0 && p.k1 == 0.0) throw Error(ErrorCode::InvalidArgument, "p must be nonzero");
  return cplx(v * p.k1, -p.k0) / cplx(v * p.k1, p.k0) / (4.0 * pi * std::abs(v));
}

CMat t_matrix(std::span<const cplx> bubble, const RMat& Lambda, const RVec& Z, double vhat) {
  const auto n = static_cast<Eigen::Index>(bubble.size());
  if (Lambda.rows() != n || Lambda.cols() != n || Z.size() != n)
    throw Error(ErrorCode::InvalidArgument, "shape mismatch");
  CVec b(n);
  for (Eigen::Index i = 0; i < n; ++i) b(i) = bubble[i];
  const RMat LZ = Z.cwiseInverse().asDiagonal() * Lambda * Z.asDiagonal();
  const CMat Tinv = CMat::Identity(n, n) + vhat * (b.asDiagonal() * LZ.cast<cplx>());
  Eigen::JacobiSVD<CMat> svd(Tinv);
  const auto& sv = svd.singularValues();
  if (sv(n - 1) == 0.0 || sv(0) / sv(n - 1) > 1e12)
    throw Error(ErrorCode::NearSingularT, "T^{-1} is numerically singular");
  return Tinv.inverse();
}

CMat t_matrix(Momentum2 p, const RMat& Lambda, const RVec& Z, const RVec& v, double vhat) {
  std::vector<cplx> b(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) b[i] = bubble_closed_form(p, v(i));
  return t_matrix(b, Lambda, Z, vhat);
}

double vertex_ward_residual(const ChiralPropagator& g, Momentum2 k, Momentum2 p) {
  const cplx lhs = g(k) * g(k + p);
  const cplx rhs = (g(k) - g(k + p)) / (g.Z * g.D(p));
  return std::abs(lhs - rhs);
}

namespace {

struct LoopSums {
  cplx all;
  cplx first;  // identity ordering alone
};

LoopSums loop_sums(const ChiralPropagator& g, std::span<const Momentum2> p_in, const ReferenceGrid& grid,
                   bool single_ordering) {
  const int m = static_cast<int>(p_in.size()) + 1;
  if (m < 3) throw Error(ErrorCode::InvalidArgument, "loops need m >= 3");
  std::vector<Momentum2> p(p_in.begin(), p_in.end());
  Momentum2 last{0, 0};
  for (const auto& q : p) last = last - q;
  p.push_back(last);
  const double s = grid.spacing();
  for (const auto& q : p) {
    if (q.k0 == 0.0 && q.k1 == 0.0) throw Error(ErrorCode::InvalidArgument, "insertions must carry nonzero momentum");
    grid.check(q, g.N);
  }

  // Offsets of K_t = k - Σ_{j ≤ t} p_σj in grid units.
  std::vector<std::vector<std::pair<long, long>>> paths;
  std::vector<int> rest(m - 1);
  std::iota(rest.begin(), rest.end(), 1);
  do {
    std::vector<std::pair<long, long>> path{{0, 0}};
    long o0 = 0, o1 = 0;
    std::vector<int> order{0};
    order.insert(order.end(), rest.begin(), rest.end());
    for (int t = 1; t < m; ++t) {
      o0 += std::lround(p[order[t - 1]].k0 / s);
      o1 += std::lround(p[order[t - 1]].k1 / s);
      path.emplace_back(o0, o1);
    }
    paths.push_back(std::move(path));
  } while (!single_ordering && std::next_permutation(rest.begin(), rest.end()));

  long omax0 = 0, omax1 = 0, omin0 = 0, omin1 = 0;
  for (const auto& path : paths)
    for (auto [a, b] : path) {
      omax0 = std::max(omax0, a);
      omin0 = std::min(omin0, a);
      omax1 = std::max(omax1, b);
      omin1 = std::min(omin1, b);
    }

  const double R = std::ldexp(1.0, g.N);
  const double av = std::abs(g.v);
  const double ext0 = 1.5 * R;
  const double ext1 = (g.shape == CutoffShape::Radial ? 1.5 * R : 0.75 * R) / av;
  const long H0 = static_cast<long>(std::ceil(ext0 / s)) + 1;  // rows n0 ∈ [-H0, H0)
  const long H1 = static_cast<long>(std::ceil(ext1 / s)) + 1;
  // Cached columns n1 ∈ [-H1 - omax1, H1 - omin1) so every shifted lookup stays in range.
  const long c_lo = -H1 - omax1, c_hi = H1 - omin1;
  const auto width = static_cast<std::size_t>(c_hi - c_lo);
  const double invZ = 1.0 / g.Z;
  constexpr long kChunk = 256;
  const long nchunks = (2 * H0 + kChunk - 1) / kChunk;

  // g on one row, split into real and imaginary parts; the cutoff is only evaluated off the plateau.
  auto fill_row = [&](double k0, double* re, double* im) {
    std::fill(re, re + width, 0.0);
    std::fill(im, im + width, 0.0);
    if (std::abs(k0) >= ext0) return;
    const double c0 = g.shape == CutoffShape::Radial ? 1.0 : cutoff(k0 / R);
    if (c0 == 0.0) return;
    // Columns n1 and -n1-1 share |k1|, so the cutoff is evaluated once per pair.
    long n_hi = H1 + std::max(std::abs(omax1), std::abs(omin1)) + 1;
    if (g.shape == CutoffShape::Radial)
      n_hi = std::min(n_hi, static_cast<long>(std::ceil(std::sqrt(ext0 * ext0 - k0 * k0) / av / s)) + 1);
    for (long n = 0; n < n_hi; ++n) {
      const double a = g.v * s * (double(n) + 0.5);  // D = ±a + i k0
      double c;
      if (g.shape == CutoffShape::Radial) {
        const double n2 = k0 * k0 + a * a;
        c = n2 <= R * R ? 1.0 : n2 >= 2.25 * R * R ? 0.0 : cutoff(std::sqrt(n2) / R);
      } else {
        c = c0 * cutoff(2.0 * a / R);
      }
      if (c == 0.0) continue;
      const double f = c * invZ / (a * a + k0 * k0);
      for (long col : {n, -n - 1}) {
        if (col < c_lo || col >= c_hi) continue;
        const auto j = static_cast<std::size_t>(col - c_lo);
        re[j] = col == n ? f * a : -f * a;
        im[j] = -f * k0;
      }
    }
  };

  // Rows n0 - o0 live in a ring of span rows, each filled once per chunk.
  const long span = omax0 - omin0 + 1;
  auto chunk = [&](std::size_t c) {
    const long r0 = -H0 + static_cast<long>(c) * kChunk;
    const long r1 = std::min(H0, r0 + kChunk);
    std::vector<double> Gre(static_cast<std::size_t>(span) * width), Gim(Gre.size());
    auto slot = [&](long q) { return static_cast<std::size_t>(((q % span) + span) % span) * width; };
    auto fill = [&](long q) { fill_row(s * (double(q) + 0.5), Gre.data() + slot(q), Gim.data() + slot(q)); };
    for (long q = r0 - omax0; q < r0 - omin0; ++q) fill(q);
    LoopSums acc{0.0, 0.0};
    std::vector<const double*> pre(m), pim(m);
    for (long n0 = r0; n0 < r1; ++n0) {
      fill(n0 - omin0);
      // The identity insertion g(k) vanishes outside the support, which bounds n1.
      const double k0 = s * (double(n0) + 0.5);
      if (std::abs(k0) >= ext0) continue;
      long lo = -H1, hi = H1;
      if (g.shape == CutoffShape::Radial) {
        const double half = std::sqrt(std::max(0.0, ext0 * ext0 - k0 * k0)) / av / s;
        lo = std::max(lo, static_cast<long>(std::floor(-half - 0.5)) - 1);
        hi = std::min(hi, static_cast<long>(std::ceil(half - 0.5)) + 1);
      }
      for (std::size_t oi = 0; oi < paths.size(); ++oi) {
        const auto& path = paths[oi];
        for (int t = 0; t < m; ++t) {
          const auto off = slot(n0 - path[t].first);
          pre[t] = Gre.data() + off - c_lo - path[t].second;
          pim[t] = Gim.data() + off - c_lo - path[t].second;
        }
        double sr = 0.0, si = 0.0;
        for (long n1 = lo; n1 < hi; ++n1) {
          double xr = pre[0][n1], xi = pim[0][n1];
          for (int t = 1; t < m; ++t) {
            const double yr = pre[t][n1], yi = pim[t][n1];
            const double zr = xr * yr - xi * yi;
            xi = xr * yi + xi * yr;
            xr = zr;
          }
          sr += xr;
          si += xi;
        }
        acc.all += cplx(sr, si);
        if (oi == 0) acc.first += cplx(sr, si);
      }
    }
    return acc;
  };
  std::vector<LoopSums> parts(static_cast<std::size_t>(nchunks));
  parallel_for(parts.size(), [&](std::size_t c) { parts[c] = chunk(c); });
  LoopSums S{0.0, 0.0};
  for (const auto& x : parts) {
    S.all += x.all;
    S.first += x.first;
  }
  const double norm = -1.0 / (grid.beta * grid.beta);
  return {norm * S.all, norm * S.first};
}

}  // namespace

cplx chiral_m_loop(const ChiralPropagator& g, std::span<const Momentum2> p, const ReferenceGrid& grid,
                   bool single_ordering) {
  return loop_sums(g, p, grid, single_ordering).all;
}

LoopScan chiral_loop_scan(double v, CutoffShape shape, std::span<const Momentum2> p, int N_lo, int N_hi,
                          const ReferenceGrid& grid) {
  if (N_hi < N_lo) throw Error(ErrorCode::InvalidArgument, "empty N range");
  LoopScan out{};
  std::vector<double> xs, ys;
  for (int N = N_lo; N <= N_hi; ++N) {
    ChiralPropagator g{v, 1.0, N, shape};
    const LoopSums sums = loop_sums(g, p, grid, false);
    LoopScanRow r{N, sums.all, std::abs(sums.first)};
    out.rows.push_back(r);
    xs.push_back(N);
    ys.push_back(std::log(std::max(std::abs(r.value), 1e-300) / N));
  }
  if (xs.size() >= 2) {
    const LinearFit fit = least_squares(xs, ys);
    out.gamma_hat = -fit.slope / std::log(2.0);
    out.gamma_stderr = fit.slope_stderr / std::log(2.0);
  }
  return out;
}

std::vector<BubbleScanRow> bubble_scan(double v, Momentum2 p, int N_lo, int N_hi, const ReferenceGrid& grid) {
  std::vector<BubbleScanRow> out;
  const cplx exact = bubble_closed_form(p, v);
  for (int N = N_lo; N <= N_hi; ++N) {
    ChiralPropagator g{v, 1.0, N, CutoffShape::Radial};
    BubbleScanRow r{N, anomalous_bubble_N(g, p, grid), 0.0, 0.0};
    r.richardson = out.empty() ? r.value : 2.0 * r.value - out.back().value;
    r.error = std::abs(r.value - exact);
    out.push_back(r);
  }
  return out;
}

}  // namespace kubo
