#include "kubo/response_formulas.hpp"

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kubo/errors.hpp"

namespace kubo {

namespace {

double condition_number(const CMat& A) {
  Eigen::JacobiSVD<CMat> svd(A);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin == 0.0 ? std::numeric_limits<double>::infinity() : s(0) / smin;
}

// (4π|v|)^{-1} as a diagonal matrix.
RMat inv_four_pi_abs_v(const RVec& v) { return (1.0 / (4.0 * pi * v.array().abs())).matrix().asDiagonal(); }

}  // namespace

void ResponseMatrixSet::validate() const {
  const auto n = v.size();
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "need at least one chirality");
  if (Lambda.rows() != n || Lambda.cols() != n) throw Error(ErrorCode::InvalidArgument, "Lambda has wrong shape");
  if (Z.size() != n) throw Error(ErrorCode::InvalidArgument, "Z has wrong length");
  if (!(a > 0)) throw Error(ErrorCode::InvalidArgument, "a must be positive");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (v(i) == 0.0) throw Error(ErrorCode::InvalidArgument, "velocities must be nonzero");
    if (!(Z(i) > 0)) throw Error(ErrorCode::InvalidArgument, "Z must be positive");
    if (Lambda(i, i) != 0.0) throw Error(ErrorCode::InvalidArgument, "Lambda must have zero diagonal");
    for (Eigen::Index j = 0; j < i; ++j)
      if (Lambda(i, j) != Lambda(j, i)) throw Error(ErrorCode::InvalidArgument, "Lambda must be symmetric");
  }
  Eigen::JacobiSVD<RMat> svd(Lambda);
  if (svd.singularValues()(0) / (4.0 * pi * v.cwiseAbs().minCoeff()) >= 1.0)
    throw Error(ErrorCode::InvalidArgument, "|Lambda|/(4 pi min|v|) must be below 1");
}

ResponseMatrixSet ResponseMatrixSet::two_chirality(double v_star, double lambda_star, double a) {
  ResponseMatrixSet s;
  s.v = RVec::Zero(2);
  s.v << v_star, -v_star;
  s.Lambda = RMat::Zero(2, 2);
  s.Lambda(0, 1) = s.Lambda(1, 0) = lambda_star;
  s.a = a;
  s.Z = RVec::Ones(2);
  return s;
}

ResponseMatrixSet ResponseMatrixSet::lambda_linear(const FermiSurface& fs, double lambda, double a) {
  const auto n = static_cast<Eigen::Index>(fs.points.size());
  ResponseMatrixSet s;
  s.v = RVec(n);
  for (Eigen::Index i = 0; i < n; ++i) s.v(i) = fs.points[i].v;
  s.Lambda = RMat::Constant(n, n, lambda);
  s.Lambda.diagonal().setZero();
  s.a = a;
  s.Z = RVec::Ones(n);
  return s;
}

CMat k_tilde(const ResponseMatrixSet& s, double q) {
  const int n = s.nf();
  const RMat A = inv_four_pi_abs_v(s.v);
  CVec frac(n);
  for (int i = 0; i < n; ++i) frac(i) = cplx(s.v(i) * q, 1.0 / s.a) / cplx(s.v(i) * q, -1.0 / s.a);
  const CMat one = CMat::Identity(n, n);
  const CMat M = one + frac.asDiagonal() * (A * s.Lambda).cast<cplx>();
  const double cond = condition_number(M);
  if (cond > 1e12) throw Error(ErrorCode::NearSingularT, "condition number " + std::to_string(cond));
  return (one - (A * s.Lambda).cast<cplx>()) * M.inverse();
}

CMat frak_k(const ResponseMatrixSet& s, int nu) {
  const int n = s.nf();
  if (nu == 0) return CMat::Identity(n, n);
  if (nu != 1) throw Error(ErrorCode::InvalidArgument, "nu must be 0 or 1");
  const RMat AL = inv_four_pi_abs_v(s.v) * s.Lambda;
  const RMat one = RMat::Identity(n, n);
  const RMat den = one - AL;
  const double cond = condition_number(den.cast<cplx>());
  if (cond > 1e12) throw Error(ErrorCode::NearSingularT, "condition number " + std::to_string(cond));
  const RMat sg = s.v.array().sign().matrix().asDiagonal();
  return (sg * (one + AL) * den.inverse() * sg).cast<cplx>();
}

CMat k_nu(const ResponseMatrixSet& s, double q, int nu) {
  const int n = s.nf();
  CVec d(n);
  for (int i = 0; i < n; ++i) {
    const double vnu = nu == 0 ? 1.0 : s.v(i);
    d(i) = vnu / (2.0 * pi * std::abs(s.v(i))) * (s.v(i) * q) / cplx(s.v(i) * q, -1.0 / s.a);
  }
  return k_tilde(s, q) * d.asDiagonal() * frak_k(s, nu);
}

TwoChiralitySums two_chirality_closed_forms(double v_star, double lambda_star, double q, double a) {
  if (!(std::abs(lambda_star) < 4.0 * pi * v_star))
    throw Error(ErrorCode::InvalidArgument, "need |lambda*| < 4 pi v*");
  const double r = (4.0 * pi * v_star - lambda_star) / (4.0 * pi * v_star + lambda_star);
  const double vq = v_star * a * q;
  const double den = 1.0 + vq * vq;
  return {r / (pi * v_star) * vq * vq / den, cplx(0.0, r / pi * vq / den)};
}

ChiLinResult chi_lin(const ResponseMatrixSet& s, double x, double theta, int nu, const ProfileHat& mu_hat,
                     double support) {
  s.validate();
  auto integrand = [&](double q) {
    const double m = mu_hat(q);
    if (m == 0.0) return cplx(0.0);
    return m * std::exp(I * (theta * q * x)) * k_nu(s, q, nu).sum();
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  double err_re = 0.0, err_im = 0.0;
  const double re = GK::integrate([&](double q) { return integrand(q).real(); }, -support, support, 20, 1e-14, &err_re);
  const double im = GK::integrate([&](double q) { return integrand(q).imag(); }, -support, support, 20, 1e-14, &err_im);
  const double err = (err_re + err_im) / (2.0 * pi);
  if (!(err < 1e-10)) throw Error(ErrorCode::QuadratureFailure, "error estimate " + std::to_string(err));
  return {-re / (2.0 * pi), -im / (2.0 * pi), err};
}

VertexRenormalizations vertex_renormalizations(const RVec& v, const RMat& Lambda, const RVec& Z) {
  const auto n = v.size();
  if (Lambda.rows() != n || Lambda.cols() != n || Z.size() != n)
    throw Error(ErrorCode::InvalidArgument, "shape mismatch");
  const RMat LZ = Z.cwiseInverse().asDiagonal() * Lambda * Z.asDiagonal();
  const RMat B = LZ.transpose() * inv_four_pi_abs_v(v);
  const RMat one = RMat::Identity(n, n);
  for (const RMat& M : {RMat(one - B), RMat(one + B)}) {
    const double cond = condition_number(M.cast<cplx>());
    if (cond > 1e12) throw Error(ErrorCode::NearSingular, "condition number " + std::to_string(cond));
  }
  return {(one - B) * Z, (one + B) * v.asDiagonal() * Z};
}

}  // namespace kubo
