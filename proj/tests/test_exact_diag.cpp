#include <doctest.h>

#include <random>

#include "kubo/adiabatic_dynamics.hpp"
#include "kubo/errors.hpp"
#include "kubo/exact_diag.hpp"

using namespace kubo;

namespace {

LatticeModel chain(double mu, double lambda) {
  LatticeModel m;
  m.mu = mu;
  m.lambda = lambda;
  m.potential = TwoBodyPotential::nearest_neighbour(1.0);
  return m;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::CheckFailed;
}

CMat random_hermitian(int n, std::mt19937& rng) {
  std::normal_distribution<double> N;
  CMat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = cplx(N(rng), N(rng));
  return (A + A.adjoint()) / 2.0;
}

}  // namespace

TEST_CASE("Fock space sectors") {
  const FockSpace F(6);
  std::size_t total = 0;
  for (int N = 0; N <= 6; ++N) total += F.states(N).size();
  CHECK(total == 64);
  CHECK(F.states(3).size() == 20);
}

TEST_CASE("canonical anticommutation relations") {
  const int modes = 4;
  const auto dim = Eigen::Index(1) << modes;
  for (int a = 0; a < modes; ++a)
    for (int b = 0; b < modes; ++b) {
      const CMat A = dense_annihilator(modes, a), B = dense_annihilator(modes, b);
      const CMat ac = A * B.adjoint() + B.adjoint() * A;
      CHECK((ac - (a == b ? 1.0 : 0.0) * CMat::Identity(dim, dim)).norm() < 1e-14);
      CHECK((A * B + B * A).norm() < 1e-14);
    }
}

TEST_CASE("bilinears represent the one-body commutator") {
  std::mt19937 rng(11);
  const FockSpace F(5);
  const CMat A = random_hermitian(5, rng), B = random_hermitian(5, rng);
  const BlockOp lhs = commutator(bilinear(F, A), bilinear(F, B));
  const BlockOp rhs = bilinear(F, A * B - B * A);
  CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("ensemble diagonalization") {
  const ManyBodyEnsemble ens(chain(1.1, 0.3), 5, 2.0);
  CHECK(ens.eigen_residual() < 1e-10);
  double total = 0.0;
  for (int N = 0; N <= 5; ++N) total += ens.weights(N).sum();
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(ens.expectation(ens.number()) - ens.expectation(ens.number()).real()) < 1e-14);
}

TEST_CASE("KMS and continuity on L = 5") {
  const ManyBodyEnsemble ens(chain(1.1, 0.3), 5, 2.0);
  for (auto [t, s] : {std::pair{0.3, 1.1}, std::pair{1.7, 0.2}}) {
    CHECK(kms_check(ens, ens.density(0), ens.observable(1, 2), t, s) < 1e-9);
    CHECK(kms_check(ens, ens.observable(1, 4), ens.density(1), t, s) < 1e-9);
  }
  for (int x = 0; x < 5; ++x) CHECK(continuity_check(ens, x) < 1e-12);
}

TEST_CASE("Wick rotation, first order") {
  for (double lambda : {0.0, 0.25}) {
    const ManyBodyEnsemble ens(chain(1.4, lambda), 4, 4.0);
    for (double eta : {pi / 2, pi}) {
      const auto r = wick_rotation_check(ens, 1, ens.observable(1, 0), ens.density(1), eta);
      CHECK(r.residual < 1e-8);
      CHECK(std::abs(r.lhs) > 1e-6);
      const auto r0 = wick_rotation_check(ens, 1, ens.density(2), ens.density(0), eta, -0.7);
      CHECK(r0.residual < 1e-8);
    }
  }
}

TEST_CASE("Wick rotation, second order") {
  for (double lambda : {0.0, 0.25}) {
    const ManyBodyEnsemble ens(chain(0.9, lambda), 3, 4.0);
    const auto r = wick_rotation_check(ens, 2, ens.observable(1, 0), ens.density(1), pi / 2);
    CHECK(r.residual < 1e-7);
    CHECK(std::abs(r.lhs) > 1e-6);
  }
}

TEST_CASE("Wick rotation rejects non-Matsubara rates") {
  const ManyBodyEnsemble ens(chain(1.4, 0.0), 3, 4.0);
  CHECK(code_of([&] { wick_rotation_check(ens, 1, ens.density(0), ens.density(1), 1.0); }) ==
        ErrorCode::EtaNotMatsubara);
}

TEST_CASE("Ward identity at zero spatial momentum") {
  const ManyBodyEnsemble ens(chain(1.4, 0.3), 4, 3.0);
  for (int nu : {0, 1})
    for (int n : {1, 2}) CHECK(std::abs(ward_p0_value(ens, 2 * pi * n / 3.0, nu)) < 1e-9);
}

TEST_CASE("coincident times are flagged") {
  const ManyBodyEnsemble ens(chain(1.4, 0.3), 3, 3.0);
  const std::vector<BlockOp> ops{ens.to_eigenbasis(ens.density(0)), ens.to_eigenbasis(ens.density(1))};
  const std::vector<double> t{0.5, 0.5};
  CHECK(code_of([&] { euclidean_moment(ens, ops, t); }) == ErrorCode::CoincidentTimes);
}

TEST_CASE("integrated cumulant matches a time grid") {
  const ManyBodyEnsemble ens(chain(1.2, 0.3), 3, 2.0);
  const std::vector<BlockOp> ops{ens.to_eigenbasis(ens.density(0)), ens.to_eigenbasis(ens.density(1))};
  const double q = 2 * pi / 2.0;
  const std::vector<double> qs{q, 0.0};
  const cplx exact = integrated_cumulant(ens, ops, qs, true);
  // Midpoint rule on s ∈ (0, β) with the second operator at 0.
  const int n = 4000;
  cplx sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = 2.0 * (i + 0.5) / n;
    const std::vector<double> t{s, 0.0};
    sum += std::exp(-I * q * s) * euclidean_cumulant(ens, ops, t);
  }
  sum *= 2.0 / n;
  CHECK(std::abs(sum - exact) < 1e-6);
}

TEST_CASE("free correlators agree with the quasi-free formulas") {
  const double beta = 3.0;
  const int L = 4;
  const ManyBodyEnsemble ens(chain(1.3, 0.0), L, beta);
  const FreeTheory ft(BlochHamiltonian::laplacian(), 1.3, beta, L);
  for (int nu : {0, 1})
    for (Momentum2 p : {Momentum2{2 * pi / beta, pi / 2}, Momentum2{0.0, pi}, Momentum2{4 * pi / beta, -pi / 2}})
      CHECK(std::abs(fourier_correlator(ens, std::vector<Momentum2>{p}, nu) - ft.density_current_bubble(p, nu)) < 1e-7);
  const std::vector<Momentum2> p3{{2 * pi / beta, pi / 2}, {2 * pi / beta, pi}};
  for (int nu : {0, 1})
    CHECK(std::abs(fourier_correlator(ens, p3, nu) - ft.m_point_density_loop(p3, nu).value) < 1e-7);
}

TEST_CASE("Fock-space response agrees with the quasi-free evolution") {
  const double beta = 3.0, eta = 0.5, theta = 0.02, mu = 0.7;
  const int L = 6;
  const ManyBodyEnsemble ens(chain(mu, 0.0), L, beta);
  const QuasiFreeDynamics qf(BlochHamiltonian::laplacian(), mu, beta, L);
  std::vector<double> V(L);
  for (int x = 0; x < L; ++x) V[x] = theta * (0.3 + std::cos(2 * pi * x / L) + 0.2 * std::sin(4 * pi * x / L));
  const double t0 = QuasiFreeDynamics::default_t0(eta, V);
  const auto pr = qf.propagate(eta, V, t0);
  for (int nu : {0, 1}) {
    const SmallResponse ed = full_response_small(ens, eta, theta, V, nu, t0);
    const auto q = qf.current_profile(pr.delta_gamma, nu);
    CHECK(ed.unitarity_defect < 1e-10);
    for (int x = 0; x < L; ++x) CHECK(std::abs(ed.chi[x] - q[x] / theta) < 1e-8);
  }
}

TEST_CASE("Fock-space response size guard") {
  const ManyBodyEnsemble ens(chain(0.7, 0.0), 11, 1.0, 14);
  const std::vector<double> V(11, 0.01);
  CHECK(code_of([&] { full_response_small(ens, 0.5, 0.01, V, 0, -10.0); }) == ErrorCode::DimensionTooLarge);
}
