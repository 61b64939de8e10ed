#include "kubo/lattice_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kubo/errors.hpp"

namespace kubo {

BlochHamiltonian::BlochHamiltonian(int M, std::vector<CMat> blocks) : M_(M), blocks_(std::move(blocks)) {
  if (M <= 0 || blocks_.empty())
    throw Error(ErrorCode::InvalidArgument, "need M > 0 and at least the on-site block");
  for (const auto& b : blocks_)
    if (b.rows() != M || b.cols() != M) throw Error(ErrorCode::InvalidArgument, "hopping block has wrong shape");
  if ((blocks_[0] - blocks_[0].adjoint()).norm() > 1e-12)
    throw Error(ErrorCode::InvalidArgument, "on-site block is not Hermitian");
  blocks_[0] = 0.5 * (blocks_[0] + blocks_[0].adjoint()).eval();
}

BlochHamiltonian BlochHamiltonian::laplacian(double t) {
  return BlochHamiltonian(1, {CMat::Constant(1, 1, 2.0 * t), CMat::Constant(1, 1, -t)});
}

CMat BlochHamiltonian::block(int d) const {
  const int a = std::abs(d);
  if (a > range()) return CMat::Zero(M_, M_);
  return d >= 0 ? blocks_[a] : CMat(blocks_[a].adjoint());
}

CMat bloch_matrix(const BlochHamiltonian& H, double k) {
  const int R = H.range();
  CMat h = CMat::Zero(H.dim(), H.dim());
  for (int d = -R; d <= R; ++d) h += std::exp(-I * (k * d)) * H.block(d);
  return 0.5 * (h + h.adjoint());
}

CMat bloch_derivative(const BlochHamiltonian& H, double k) {
  const int R = H.range();
  CMat h = CMat::Zero(H.dim(), H.dim());
  for (int d = -R; d <= R; ++d) h += (-I * double(d)) * std::exp(-I * (k * d)) * H.block(d);
  return 0.5 * (h + h.adjoint());
}

namespace {

Eigen::SelfAdjointEigenSolver<CMat> diagonalize(const BlochHamiltonian& H, double k) {
  Eigen::SelfAdjointEigenSolver<CMat> es(bloch_matrix(H, k));
  if (es.info() != Eigen::Success) {
    std::ostringstream os;
    os << "at k = " << k;
    throw Error(ErrorCode::EigenSolverFailure, os.str());
  }
  return es;
}

double band_energy(const BlochHamiltonian& H, int band, double k) {
  if (H.dim() == 1) return bloch_matrix(H, k)(0, 0).real();
  return diagonalize(H, k).eigenvalues()(band);
}

}  // namespace

std::vector<BandSample> band_structure(const BlochHamiltonian& H, std::span<const double> grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty momentum grid");
  std::vector<BandSample> out;
  out.reserve(grid.size());
  for (double k : grid) {
    auto es = diagonalize(H, k);
    out.push_back({k, es.eigenvalues(), es.eigenvectors()});
  }
  return out;
}

double wrap_angle(double k) {
  double r = std::remainder(k, 2.0 * pi);
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

FermiSurface find_fermi_points(const BlochHamiltonian& H, double mu, const FermiSearchOptions& opt) {
  const int M = H.dim();
  const int n = opt.grid;
  std::vector<RVec> e(n);
  for (int j = 0; j < n; ++j) e[j] = diagonalize(H, 2.0 * pi * j / n).eigenvalues();

  FermiSurface fs;
  fs.report.min_gap = std::numeric_limits<double>::infinity();
  for (int b = 0; b < M; ++b) {
    for (int j = 0; j < n; ++j) {
      const double fa = e[j](b) - mu;
      const double fb = e[(j + 1) % n](b) - mu;
      if (!(fa == 0.0 || fa * fb < 0.0)) continue;
      double lo = 2.0 * pi * j / n, hi = 2.0 * pi * (j + 1) / n;
      double kf = lo;
      if (fa != 0.0) {
        double flo = fa;
        while (hi - lo > opt.root_tol) {
          const double mid = 0.5 * (lo + hi);
          const double fm = band_energy(H, b, mid) - mu;
          if (fm == 0.0) { lo = hi = mid; break; }
          if ((fm < 0) == (flo < 0)) { lo = mid; flo = fm; } else { hi = mid; }
        }
        kf = 0.5 * (lo + hi);
      }
      if (kf >= 2.0 * pi) kf -= 2.0 * pi;
      auto es = diagonalize(H, kf);
      const CVec u = es.eigenvectors().col(b);
      const double v = (u.adjoint() * bloch_derivative(H, kf) * u)(0, 0).real();
      if (std::abs(v) < opt.velocity_tol) {
        std::ostringstream os;
        os << "band " << b << " touches mu at k = " << kf << " with v = " << v;
        throw Error(ErrorCode::BandEdge, os.str());
      }
      for (int c = 0; c < M; ++c) {
        if (c == b) continue;
        const double gap = std::abs(es.eigenvalues()(c) - es.eigenvalues()(b));
        fs.report.min_gap = std::min(fs.report.min_gap, gap);
        if (gap <= opt.delta_degen) fs.report.nondegenerate = false;
      }
      fs.points.push_back({0, kf, v, b});
    }
  }
  if (fs.points.empty()) throw Error(ErrorCode::NoFermiPoint, "mu = " + std::to_string(mu));

  std::sort(fs.points.begin(), fs.points.end(), [](const auto& a, const auto& b) { return a.k_F < b.k_F; });
  int chirality = 0;
  for (std::size_t i = 0; i < fs.points.size(); ++i) {
    fs.points[i].omega = static_cast<int>(i) + 1;
    chirality += fs.points[i].v > 0 ? 1 : -1;
    if (i > 0 && std::abs(wrap_angle(fs.points[i].k_F - fs.points[i - 1].k_F)) < opt.elastic_tol)
      fs.report.distinct_points = false;
  }
  fs.report.net_chirality_zero = (chirality == 0);
  if (!fs.report.distinct_points) fs.report.nondegenerate = false;

  const int nf = static_cast<int>(fs.points.size());
  for (int a = 0; a < nf; ++a)
    for (int b = 0; b < nf; ++b)
      for (int c = 0; c < nf; ++c)
        for (int d = 0; d < nf; ++d) {
          const double s = fs.points[a].k_F - fs.points[b].k_F - fs.points[c].k_F + fs.points[d].k_F;
          if (std::abs(wrap_angle(s)) > opt.elastic_tol) continue;
          if ((a == b && c == d) || (a == c && b == d)) continue;
          fs.report.elastic = false;
          fs.report.violations.push_back({a + 1, b + 1, c + 1, d + 1});
        }
  return fs;
}

void require_assumptions(const FermiSurface& fs) {
  if (!fs.report.nondegenerate)
    throw Error(ErrorCode::DegenerateCrossing, "gap to neighbouring band " + std::to_string(fs.report.min_gap));
  if (!fs.report.elastic) {
    const auto& q = fs.report.violations.front();
    std::ostringstream os;
    os << "quadruple (" << q[0] << "," << q[1] << "," << q[2] << "," << q[3] << ")";
    throw Error(ErrorCode::ElasticScatteringViolated, os.str());
  }
}

CMat current_vertex(const BlochHamiltonian& H, int nu, double k, double p) {
  const int M = H.dim();
  if (nu == 0) return CMat::Identity(M, M);
  if (nu != 1) throw Error(ErrorCode::InvalidArgument, "nu must be 0 or 1");
  const int R = H.range();
  CMat J = CMat::Zero(M, M);
  for (int d = -R; d <= R; ++d) {
    if (d == 0) continue;
    cplx c = 0.0;
    if (d > 0)
      for (int j = 1; j <= d; ++j) c -= std::exp(I * (p * j));
    else
      for (int j = 0; j < -d; ++j) c += std::exp(-I * (p * j));
    J += (I * c * std::exp(-I * (k * d))) * H.block(d);
  }
  if (p == 0.0) J = 0.5 * (J + J.adjoint()).eval();
  return J;
}

TwoBodyPotential::TwoBodyPotential(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) w_.push_back(0.0);
}

double TwoBodyPotential::operator()(int d) const {
  const int a = std::abs(d);
  return a <= range() ? w_[a] : 0.0;
}

double TwoBodyPotential::fourier(double k) const {
  double s = w_[0];
  for (int d = 1; d <= range(); ++d) s += 2.0 * w_[d] * std::cos(k * d);
  return s;
}

namespace {
int mod(int a, int L) { return ((a % L) + L) % L; }
}  // namespace

CMat real_space_hamiltonian(const BlochHamiltonian& H, int L) {
  const int M = H.dim();
  const int R = H.range();
  CMat h = CMat::Zero(L * M, L * M);
  for (int x = 0; x < L; ++x)
    for (int d = -R; d <= R; ++d) h.block(mod(x + d, L) * M, x * M, M, M) += H.block(d);
  return h;
}

CMat current_kernel(const BlochHamiltonian& H, int L, int x) {
  const int M = H.dim();
  const int R = H.range();
  CMat C = CMat::Zero(L * M, L * M);
  for (int d = -R; d <= R; ++d) {
    if (d == 0) continue;
    const CMat hd = H.block(d);
    if (d > 0) {
      for (int j = 1; j <= d; ++j) C.block(mod(x + j, L) * M, mod(x + j - d, L) * M, M, M) -= I * hd;
    } else {
      for (int j = 0; j > d; --j) C.block(mod(x + j, L) * M, mod(x + j - d, L) * M, M, M) += I * hd;
    }
  }
  return C;
}

CMat observable_kernel(const BlochHamiltonian& H, int L, int nu, int x) {
  if (nu == 1) return current_kernel(H, L, x);
  const int M = H.dim();
  CMat C = CMat::Zero(L * M, L * M);
  C.block(mod(x, L) * M, mod(x, L) * M, M, M).setIdentity();
  return C;
}

}  // namespace kubo
