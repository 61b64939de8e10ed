#include <doctest.h>

#include <random>

#include "kubo/errors.hpp"
#include "kubo/reference_model.hpp"

using namespace kubo;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::CheckFailed;
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("cutoff shape") {
  CHECK(cutoff(0.0) == 1.0);
  CHECK(cutoff(1.0) == 1.0);
  CHECK(cutoff(-0.7) == 1.0);
  CHECK(cutoff(1.5) == 0.0);
  CHECK(cutoff(-2.0) == 0.0);
  CHECK(cutoff(1.25) == doctest::Approx(0.5).epsilon(1e-15));
  auto f = [](double s) { return s > 0 ? std::exp(-1.0 / s) : 0.0; };
  double prev = 1.0;
  for (int i = 1; i < 100; ++i) {
    const double t = 1.0 + 0.005 * i;
    const double c = cutoff(t);
    CHECK(c == doctest::Approx(f(1.5 - t) / (f(1.5 - t) + f(t - 1.0))).epsilon(1e-13));
    CHECK(c == cutoff(-t));
    CHECK(c <= prev);
    prev = c;
  }
  // Flat to all orders at the seams.
  CHECK(1.0 - cutoff(1.01) < 1e-40);
  CHECK(cutoff(1.49) < 1e-40);
}

TEST_CASE("chiral propagator support and symmetry") {
  const ChiralPropagator g{1.3, 0.8, 3, CutoffShape::Radial};
  const double R = 8.0;
  CHECK(g.chi({0.0, 1.51 * R / 1.3}) == 0.0);
  CHECK(g(Momentum2{1.6 * R, 0.0}) == cplx(0.0));
  const Momentum2 k{0.7, -2.1};
  CHECK(std::abs(g(k) * cplx(0.0, k.k0) * 0.8 + g(k) * 0.8 * 1.3 * k.k1 - 1.0) < 1e-14);
  CHECK(std::abs(g(-k) + g(k)) < 1e-15);
  CHECK(std::abs(g(Momentum2{-k.k0, k.k1}) - std::conj(g(k))) < 1e-15);
  const ChiralPropagator a{1.3, 1.0, 3, CutoffShape::Anisotropic};
  CHECK(a.chi({1.2 * R, 0.0}) < 1.0);
  CHECK(a.chi({0.0, 0.5 * R / 1.3}) == 1.0);
  CHECK(a.chi({0.0, 0.6 * R / 1.3}) < 1.0);
}

TEST_CASE("simplified delta product equals the raw one") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-14.0, 14.0);
  for (auto shape : {CutoffShape::Radial, CutoffShape::Anisotropic}) {
    const ChiralPropagator g{-0.9, 1.7, 3, shape};
    int used = 0;
    while (used < 400) {
      const Momentum2 k{U(rng), U(rng)}, p{0.3 * U(rng), 0.3 * U(rng)};
      if (g.chi(k) <= 1e-6 || g.chi(k - p) <= 1e-6) continue;
      if (std::abs(g.D(k)) < 0.1 || std::abs(g.D(k - p)) < 0.1) continue;
      CHECK(rel(delta_gg(g, k, p), delta_gg_raw(g, k, p)) < 1e-10);
      ++used;
    }
  }
}

TEST_CASE("closed-form bubble") {
  const double v = -1.6;
  CHECK(std::abs(bubble_closed_form({0.4, 0.0}, v) + 1.0 / (4 * pi * 1.6)) < 1e-16);
  CHECK(std::abs(bubble_closed_form({0.0, 2.0}, v) - 1.0 / (4 * pi * 1.6)) < 1e-16);
  for (Momentum2 p : {Momentum2{1.0, 0.5}, Momentum2{-0.3, 2.2}})
    CHECK(std::abs(bubble_closed_form(p, v)) == doctest::Approx(1.0 / (4 * pi * 1.6)).epsilon(1e-15));
}

TEST_CASE("anomalous bubble at low scales") {
  const int N = 5;
  const auto grid = ReferenceGrid::for_scale(4 * pi, N);
  const Momentum2 p{1.0, 0.5};
  const cplx ref = anomalous_bubble_N({1.0, 1.0, N}, p, grid);
  // Z drops out.
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(0.2, 5.0);
  for (int i = 0; i < 4; ++i) CHECK(rel(anomalous_bubble_N({1.0, U(rng), N}, p, grid), ref) < 1e-12);
  // Even in p, conjugated by k0 → -k0, like the closed form.
  CHECK(rel(anomalous_bubble_N({1.0, 1.0, N}, -p, grid), ref) < 1e-12);
  CHECK(rel(anomalous_bubble_N({1.0, 1.0, N}, {-p.k0, p.k1}, grid), std::conj(ref)) < 1e-12);
  // Already within a few percent of the limit.
  CHECK(rel(ref, bubble_closed_form(p, 1.0)) < 0.05);
}

TEST_CASE("anomalous bubble at zero spatial momentum") {
  const Momentum2 p{1.0, 0.0};
  const double target = -1.0 / (4 * pi);
  double prev = 1.0;
  for (int N : {4, 5, 6}) {
    const auto grid = ReferenceGrid::for_scale(4 * pi, N);
    const double e = std::abs(anomalous_bubble_N({1.0, 1.0, N}, p, grid) - target);
    CHECK(e < prev);
    prev = e;
  }
  CHECK(prev < 1e-3 / (4 * pi));
}

TEST_CASE("bubble scan rows") {
  const auto grid = ReferenceGrid::for_scale(4 * pi, 4);
  const auto rows = bubble_scan(1.0, {1.0, 0.5}, 4, 6, grid);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].error < rows[i - 1].error);
    CHECK(std::abs(rows[i].richardson - (2.0 * rows[i].value - rows[i - 1].value)) < 1e-15);
  }
}

TEST_CASE("grid guards") {
  const ChiralPropagator g{1.0, 1.0, 3};
  CHECK(code_of([&] { anomalous_bubble_N(g, {1.0, 0.5}, ReferenceGrid{4 * pi}); }) == ErrorCode::GridTooCoarse);
  const auto fine = ReferenceGrid::for_scale(4 * pi, 3);
  CHECK(fine.beta == doctest::Approx(8 * 4 * pi));
  CHECK(code_of([&] { anomalous_bubble_N(g, {0.3, 0.5}, fine); }) == ErrorCode::GridTooCoarse);
  CHECK_NOTHROW(anomalous_bubble_N(g, {1.0, 0.5}, fine));
  CHECK(ReferenceGrid::for_scale(4 * pi, 8).beta == doctest::Approx(4 * pi));
  CHECK(ReferenceGrid::for_scale(4 * pi, 5).beta == doctest::Approx(2 * 4 * pi));
}

TEST_CASE("Ward matrix") {
  const Momentum2 p{1.0, 0.5};
  const RVec v = (RVec(2) << 1.0, -1.0).finished();
  const RVec Z = (RVec(2) << 1.0, 1.4).finished();
  CHECK((t_matrix(p, RMat::Zero(2, 2), Z, v, 1.0) - CMat::Identity(2, 2)).norm() == 0.0);
  RMat L(2, 2);
  L << 0, 1.7, 1.7, 0;
  const CMat T = t_matrix(p, L, Z, v, 0.8);
  CMat Tinv = CMat::Identity(2, 2);
  for (int w = 0; w < 2; ++w)
    for (int u = 0; u < 2; ++u) Tinv(w, u) += bubble_closed_form(p, v(w)) / Z(w) * L(w, u) * Z(u) * 0.8;
  CHECK((T * Tinv - CMat::Identity(2, 2)).norm() < 1e-12);
  const std::vector<cplx> b{0.5, 0.5};
  RMat S(2, 2);
  S << 0, 2.0, 2.0, 0;
  CHECK(code_of([&] { t_matrix(b, S, RVec::Ones(2), 1.0); }) == ErrorCode::NearSingularT);
}

TEST_CASE("free vertex Ward identity inside the cutoff") {
  const ChiralPropagator g{1.2, 0.9, 4};
  for (Momentum2 k : {Momentum2{0.5, 1.5}, Momentum2{-3.0, 2.0}})
    for (Momentum2 p : {Momentum2{1.0, 0.5}, Momentum2{-0.25, 2.0}}) CHECK(vertex_ward_residual(g, k, p) < 1e-14);
  // Outside the flat region the identity no longer holds.
  CHECK(vertex_ward_residual(g, {0.0, 18.0 / 1.2}, {0.0, 2.0}) > 1e-3);
}

TEST_CASE("chiral loop symmetries") {
  const int N = 4;
  const auto grid = ReferenceGrid::for_scale(4 * pi, N);
  SUBCASE("cyclic relabelling, m = 4") {
    const ChiralPropagator g{1.0, 1.0, N, CutoffShape::Anisotropic};
    const std::vector<Momentum2> p{{0.5, 0.5}, {0.5, -1.0}, {-1.5, 0.25}};
    const Momentum2 last = -(p[0] + p[1] + p[2]);
    const std::vector<Momentum2> q{p[1], p[2], last};
    const cplx a = chiral_m_loop(g, p, grid), b = chiral_m_loop(g, q, grid);
    CHECK(std::abs(a) > 1e-8);
    CHECK(rel(b, a) < 1e-10);
  }
  SUBCASE("reflections, m = 3 single ordering") {
    const ChiralPropagator g{1.0, 1.0, N};
    const std::vector<Momentum2> p{{0.5, 0.5}, {0.5, -1.0}};
    const cplx a = chiral_m_loop(g, p, grid, true);
    CHECK(std::abs(a) > 1e-3);
    const std::vector<Momentum2> neg{-p[0], -p[1]};
    CHECK(rel(chiral_m_loop(g, neg, grid, true), -a) < 1e-10);
    const std::vector<Momentum2> flip{{-0.5, 0.5}, {-0.5, -1.0}};
    CHECK(rel(chiral_m_loop(g, flip, grid, true), std::conj(a)) < 1e-10);
  }
  SUBCASE("the orderings cancel for m = 3") {
    const ChiralPropagator g{1.0, 1.0, N};
    const std::vector<Momentum2> p{{0.5, 0.5}, {0.5, -1.0}};
    CHECK(std::abs(chiral_m_loop(g, p, grid)) < 1e-10 * std::abs(chiral_m_loop(g, p, grid, true)));
  }
}

TEST_CASE("loop scan") {
  const std::vector<Momentum2> p{{0.5, 0.5}, {0.5, -1.0}, {-1.5, 0.25}};
  const auto grid = ReferenceGrid::for_scale(4 * pi, 4);
  const auto scan = chiral_loop_scan(1.0, CutoffShape::Anisotropic, p, 4, 5, grid);
  REQUIRE(scan.rows.size() == 2);
  CHECK(scan.rows[0].N == 4);
  CHECK(scan.rows[1].single_ordering > 0.0);
  CHECK(std::abs(scan.rows[1].value) < scan.rows[0].single_ordering);
  const ChiralPropagator g{1.0, 1.0, 4, CutoffShape::Anisotropic};
  CHECK(rel(scan.rows[0].value, chiral_m_loop(g, p, grid)) < 1e-12);
}
