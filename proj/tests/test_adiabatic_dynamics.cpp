#include <doctest.h>

#include <numeric>

#include "kubo/adiabatic_dynamics.hpp"
#include "kubo/errors.hpp"

using namespace kubo;

namespace {

std::vector<double> drive(int L, double theta) {
  std::vector<double> V(L);
  for (int x = 0; x < L; ++x) V[x] = theta * (0.3 + std::cos(2 * pi * x / L) + 0.2 * std::sin(4 * pi * x / L));
  return V;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("bump profile") {
  CHECK(mu_hat_bump(0.0) == 1.0);
  CHECK(mu_hat_bump(1.0) == 0.0);
  CHECK(mu_hat_bump(-1.0) == 0.0);
  CHECK(mu_hat_bump(0.999) < 1e-200);
  CHECK(mu_hat_bump(0.5) == doctest::Approx(std::exp(1.0 - 1.0 / 0.75)));
}

TEST_CASE("periodized bump sums to its zero mode") {
  for (double theta : {0.3, 0.05}) {
    const auto mu = periodized_bump(theta, 256, mu_hat_bump);
    const double s = theta * std::accumulate(mu.begin(), mu.end(), 0.0);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-10));
    // Even profile centred at x = 0.
    for (int x = 1; x < 128; ++x) CHECK(mu[x] == doctest::Approx(mu[256 - x]).epsilon(1e-12));
  }
}

TEST_CASE("Matsubara rate") {
  CHECK(matsubara_rate(0.1, 2 * pi * 10) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(matsubara_rate(0.1, 100.0) == doctest::Approx(2 * pi / 100.0 * 2).epsilon(1e-14));
}

TEST_CASE("equilibrium density matrix") {
  const QuasiFreeDynamics qf(BlochHamiltonian::laplacian(), 1.2, 5.0, 24);
  const CMat G = qf.gamma_eq();
  const CMat h = real_space_hamiltonian(BlochHamiltonian::laplacian(), 24);
  CHECK((G * h - h * G).norm() < 1e-12);
  const Eigen::SelfAdjointEigenSolver<CMat> es(G);
  CHECK(es.eigenvalues().minCoeff() > -1e-14);
  CHECK(es.eigenvalues().maxCoeff() < 1.0 + 1e-14);
}

TEST_CASE("zero drive leaves the state in equilibrium") {
  const QuasiFreeDynamics qf(BlochHamiltonian::laplacian(), 1.2, 5.0, 16);
  const std::vector<double> V(16, 0.0);
  const auto r = qf.propagate(0.5, V, -20.0);
  CHECK(r.delta_gamma.norm() == 0.0);
  // The response is a ratio to θ and has no θ = 0 value.
  CHECK_THROWS_AS(qf.full_response(0.5, 0.0, 1), Error);
}

TEST_CASE("propagation invariants") {
  const int L = 32;
  const QuasiFreeDynamics qf(BlochHamiltonian::laplacian(), 1.2, 8.0, L);
  const auto V = drive(L, 0.2);
  const auto r = qf.propagate(0.3, V, QuasiFreeDynamics::default_t0(0.3, V));
  CHECK(r.unitarity_defect < 1e-10);
  CHECK(r.trace_drift < 1e-10);
  CHECK(r.spectrum_drift < 1e-9);
  CHECK(r.min_eigenvalue > -1e-9);
  CHECK(r.max_eigenvalue < 1.0 + 1e-9);
}

TEST_CASE("start time rule") {
  const std::vector<double> V{0.0, 0.5, -2.0};
  const double t0 = QuasiFreeDynamics::default_t0(0.1, V);
  CHECK(std::exp(0.1 * t0) * 2.0 == doctest::Approx(1e-8).epsilon(1e-10));
  const double t1 = QuasiFreeDynamics::default_t0(0.1, V, 1e-16);
  CHECK(std::exp(0.1 * t1) * 2.0 == doctest::Approx(1e-16).epsilon(1e-10));
}

TEST_CASE("total charge is conserved") {
  const QuasiFreeDynamics qf(BlochHamiltonian::laplacian(), 1.0, 10.0, 48);
  const auto chi = qf.full_response(0.3, 0.3, 0);
  const double s = std::accumulate(chi.begin(), chi.end(), 0.0);
  CHECK(std::abs(s) * 0.3 < 1e-10);
}

TEST_CASE("a uniform shift of the drive does not change any current") {
  const int L = 24;
  const QuasiFreeDynamics qf(BlochHamiltonian::laplacian(), 1.0, 6.0, L);
  auto V = drive(L, 0.1);
  auto W = V;
  for (double& w : W) w += 0.37;
  // Same start time for both, so only the gauge phase differs.
  const double t0 = QuasiFreeDynamics::default_t0(0.4, W);
  const auto a = qf.propagate(0.4, V, t0), b = qf.propagate(0.4, W, t0);
  for (int nu : {0, 1}) CHECK(sup_diff(qf.current_profile(a.delta_gamma, nu), qf.current_profile(b.delta_gamma, nu)) < 1e-9);
}

TEST_CASE("linear shift is the first-order part of the full response") {
  const int L = 12;
  const QuasiFreeDynamics qf(BlochHamiltonian::laplacian(), 0.7, 3.0, L);
  for (int nu : {0, 1}) {
    double prev = 0.0;
    for (double th : {1e-2, 1e-3}) {
      const auto V = drive(L, th);
      const auto r = qf.propagate(0.5, V, QuasiFreeDynamics::default_t0(0.5, V, 1e-16));
      auto full = qf.current_profile(r.delta_gamma, nu);
      const auto lin = qf.linear_shift(0.5, V, nu);
      const double d = sup_diff(full, lin) / th;
      // Second-order remainder: the deviation per unit θ shrinks tenfold with θ.
      if (prev > 0) CHECK(d < 0.15 * prev);
      prev = d;
    }
  }
}

TEST_CASE("linear response from the bubble equals the linear shift of the bump drive") {
  const int L = 40;
  const double theta = 0.2, eta = 0.3;
  const QuasiFreeDynamics qf(BlochHamiltonian::laplacian(), 1.3, 6.0, L);
  auto V = periodized_bump(theta, L);
  for (double& v : V) v *= theta;
  for (int nu : {0, 1}) {
    auto shift = qf.linear_shift(eta, V, nu);
    for (double& s : shift) s /= theta;
    CHECK(sup_diff(shift, qf.linear_response(eta, theta, nu)) < 1e-12);
  }
}

TEST_CASE("auxiliary dynamics coincide with the full dynamics on the Matsubara grid") {
  const double eta = 0.5;
  const QuasiFreeDynamics qf(BlochHamiltonian::laplacian(), 1.0, 2 * pi * 3 / eta, 32);
  const auto r = qf.auxiliary_response(eta, 0.5, 0);
  CHECK(r.eta_beta == doctest::Approx(eta).epsilon(1e-14));
  CHECK(r.max_deviation == 0.0);
}

TEST_CASE("Kubo comparison on a small chain") {
  const QuasiFreeDynamics qf(BlochHamiltonian::laplacian(), 1.0, 30.0, 48);
  const std::vector<double> etas{0.4, 0.2};
  const auto cmp = kubo_comparison(qf, etas, 1.0, 0);
  REQUIRE(cmp.rows.size() == 2);
  CHECK(cmp.rows[0].theta == doctest::Approx(0.4));
  CHECK(cmp.rows[1].deviation < cmp.rows[0].deviation);
  CHECK(cmp.monotone);
  CHECK(cmp.gamma_hat > 0.0);
  // A weaker drive at the same η deviates less.
  const auto weak = kubo_comparison(qf, etas, 0.1, 0);
  for (std::size_t i = 0; i < 2; ++i) CHECK(weak.rows[i].deviation <= cmp.rows[i].deviation);
}
