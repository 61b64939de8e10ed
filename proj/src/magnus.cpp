#include "kubo/magnus.hpp"

#include <algorithm>
#include <cmath>

#include "kubo/errors.hpp"

namespace kubo {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kA1 = 0.25 + kSqrt3 / 6.0;
constexpr double kA2 = 0.25 - kSqrt3 / 6.0;
constexpr double kC1 = 0.5 - kSqrt3 / 6.0;
constexpr double kC2 = 0.5 + kSqrt3 / 6.0;

// exp(-i h (ca A(ta) + cb A(tb))) X
CMat apply_exp(const GeneratorPair& A, double h, double ta, double ca, double tb, double cb, const CMat& X) {
  CMat Y = X;
  CMat term = X;
  CMat next(X.rows(), X.cols());
  const double scale = std::max(X.cwiseAbs().maxCoeff(), 1e-300);
  for (int r = 1; r <= 60; ++r) {
    A(ta, ca, tb, cb, term, next);
    term = (cplx(0.0, -h / r)) * next;
    Y += term;
    if (term.cwiseAbs().maxCoeff() < 1e-17 * scale) return Y;
  }
  throw Error(ErrorCode::StepControlFailure, "Taylor series of the step exponential did not converge");
}

CMat step(const GeneratorPair& A, const CMat& U, double t, double h) {
  const double t1 = t + kC1 * h, t2 = t + kC2 * h;
  CMat V = apply_exp(A, h, t1, kA1, t2, kA2, U);
  return apply_exp(A, h, t1, kA2, t2, kA1, V);
}

}  // namespace

CMat magnus_cf4(const GeneratorPair& A, CMat U, double t0, double t1, const MagnusOptions& opt, MagnusStats* stats) {
  MagnusStats st;
  double t = t0;
  double h = std::min(opt.initial_step, t1 - t0);
  const bool probing = !opt.probe.empty() && static_cast<Eigen::Index>(opt.probe.size()) < U.cols();
  while (t < t1) {
    if (st.accepted + st.rejected > opt.max_steps)
      throw Error(ErrorCode::StepControlFailure, "step budget exhausted at t = " + std::to_string(t));
    h = std::min(h, t1 - t);
    const CMat P = probing ? CMat(U(Eigen::all, opt.probe)) : U;
    const CMat big = step(A, P, t, h);
    const CMat half = step(A, P, t, 0.5 * h);
    const CMat small = step(A, half, t + 0.5 * h, 0.5 * h);
    const double err = (big - small).cwiseAbs().maxCoeff();
    if (err <= opt.tol || h <= opt.min_step) {
      if (err > opt.tol)
        throw Error(ErrorCode::StepControlFailure, "local error " + std::to_string(err) + " at minimum step");
      U = probing ? step(A, U, t, h) : small;
      t += h;
      ++st.accepted;
      st.max_local_error = std::max(st.max_local_error, err);
    } else {
      ++st.rejected;
    }
    const double fac = err > 0 ? 0.9 * std::pow(opt.tol / err, 0.2) : 4.0;
    h = std::clamp(h * std::clamp(fac, 0.2, 4.0), opt.min_step, opt.max_step);
  }
  if (stats) *stats = st;
  return U;
}

double unitarity_defect(const CMat& U) {
  const CMat G = U.adjoint() * U - CMat::Identity(U.cols(), U.cols());
  return G.cwiseAbs().maxCoeff();
}

}  // namespace kubo
