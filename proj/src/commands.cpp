#include "kubo/commands.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "kubo/adiabatic_dynamics.hpp"
#include "kubo/errors.hpp"
#include "kubo/exact_diag.hpp"
#include "kubo/parallel.hpp"
#include "kubo/reference_model.hpp"
#include "kubo/response_formulas.hpp"

#ifndef KUBO_VERSION
#define KUBO_VERSION "dev"
#endif

namespace kubo {

namespace {

using Num = CsvTable;

std::vector<Momentum2> momenta_from(const std::vector<double>& flat, const std::string& key) {
  if (flat.empty() || flat.size() % 2 != 0)
    throw Error(ErrorCode::ConfigInvalid, key + " must list (p0, p1) pairs");
  std::vector<Momentum2> out;
  for (std::size_t i = 0; i < flat.size(); i += 2) out.push_back({flat[i], flat[i + 1]});
  return out;
}

json momenta_json(std::span<const Momentum2> p) {
  json out = json::array();
  for (const auto& q : p) out.push_back({q.k0, q.k1});
  return out;
}

CommandOutput cmd_spectrum(const RunConfig& cfg) {
  const LatticeModel model = model_from_table(cfg.table);
  const int nk = cfg.table.integer("run.n_k", 256);
  if (nk < 2) throw Error(ErrorCode::ConfigInvalid, "run.n_k must be at least 2");
  std::vector<double> grid(static_cast<std::size_t>(nk));
  for (int j = 0; j < nk; ++j) grid[static_cast<std::size_t>(j)] = 2.0 * pi * j / nk;
  const auto bands = band_structure(model.hopping, grid);
  CsvTable csv({"k", "band", "energy"});
  double herm = 0.0;
  for (const auto& b : bands) {
    const CMat h = bloch_matrix(model.hopping, b.k);
    herm = std::max(herm, (h - h.adjoint()).norm());
    for (Eigen::Index i = 0; i < b.energies.size(); ++i)
      csv.row({Num::num(b.k), Num::num(static_cast<int>(i)), Num::num(b.energies(i))});
  }
  CommandOutput out;
  out.checks.push_back(CheckReport::make("bloch_hermitian", {{"n_k", nk}}, herm, 0.0, herm, cfg.tolerance("hermitian", 1e-12)));
  out.files.add("spectrum.csv", csv);
  return out;
}

CommandOutput cmd_fermi(const RunConfig& cfg) {
  const LatticeModel model = model_from_table(cfg.table);
  FermiSearchOptions opt;
  opt.grid = cfg.table.integer("run.grid", opt.grid);
  const FermiSurface fs = find_fermi_points(model.hopping, model.mu, opt);
  CsvTable csv({"omega", "k_F", "v", "band"});
  double root = 0.0;
  for (const auto& p : fs.points) {
    csv.row({Num::num(p.omega), Num::num(p.k_F), Num::num(p.v), Num::num(p.band)});
    const RVec e = Eigen::SelfAdjointEigenSolver<CMat>(bloch_matrix(model.hopping, p.k_F)).eigenvalues();
    root = std::max(root, std::abs(e(p.band) - model.mu));
  }
  const auto& r = fs.report;
  const int flags = !r.nondegenerate + !r.distinct_points + !r.elastic + !r.net_chirality_zero;
  CommandOutput out;
  const json params{{"mu", model.mu}, {"grid", opt.grid}};
  out.checks.push_back(CheckReport::make("fermi_root", params, root, 0.0, root, cfg.tolerance("root", 1e-10)));
  out.checks.push_back(CheckReport::make("fermi_assumptions",
                                         params,
                                         {{"nondegenerate", r.nondegenerate},
                                          {"distinct_points", r.distinct_points},
                                          {"elastic", r.elastic},
                                          {"net_chirality_zero", r.net_chirality_zero},
                                          {"min_gap", r.min_gap},
                                          {"violations", r.violations}},
                                         json(), flags, 0.5));
  out.files.add("fermi.csv", csv);
  return out;
}

CommandOutput cmd_kubo_scan(const RunConfig& cfg) {
  const LatticeModel model = model_from_table(cfg.table);
  const int L = cfg.table.integer("run.L", 128);
  const double beta = cfg.table.number("run.beta", 100.0);
  const auto etas = cfg.table.numbers("run.eta", {0.2, 0.1, 0.05});
  const double a = cfg.table.number("run.a", 1.0);
  const int nu = cfg.table.integer("run.nu", 0);
  DriveOptions opt{cfg.table.number("run.start_amplitude", kComparisonStartAmplitude),
                   cfg.tolerance("integrator", 1e-12)};
  const QuasiFreeDynamics qf(model.hopping, model.mu, beta, L);
  const KuboComparison cmp = kubo_comparison(qf, etas, a, nu, mu_hat_bump, opt);

  CsvTable csv({"eta", "theta", "a", "nu", "x", "chi_full", "chi_lin", "deviation"});
  json rows = json::array();
  for (const auto& r : cmp.rows) {
    for (int x = 0; x < L; ++x) {
      const auto i = static_cast<std::size_t>(x);
      csv.row({Num::num(r.eta), Num::num(r.theta), Num::num(a), Num::num(nu), Num::num(x), Num::num(r.chi_full[i]),
               Num::num(r.chi_lin[i]), Num::num(std::abs(r.chi_full[i] - r.chi_lin[i]))});
    }
    rows.push_back({{"eta", r.eta}, {"theta", r.theta}, {"deviation", r.deviation}});
  }
  int violations = 0;
  for (std::size_t i = 1; i < cmp.rows.size(); ++i) violations += !(cmp.rows[i].deviation < cmp.rows[i - 1].deviation);
  const json params{{"L", L}, {"beta", beta}, {"mu", model.mu}, {"a", a}, {"nu", nu}, {"eta", etas}};
  CommandOutput out;
  out.checks.push_back(CheckReport::make("kubo_monotone", params, rows, json(), violations, 0.5));
  auto fit = CheckReport::at_least("kubo_exponent", params, cmp.gamma_hat, 0.0);
  fit.pass = cmp.gamma_hat > 0.0;
  fit.lhs = {{"gamma_hat", cmp.gamma_hat}, {"stderr", cmp.gamma_stderr}};
  out.checks.push_back(fit);
  out.files.add("kubo_scan.csv", csv);
  out.files.add("kubo_summary.json", json{{"params", params},
                                          {"rows", rows},
                                          {"gamma_hat", cmp.gamma_hat},
                                          {"gamma_stderr", cmp.gamma_stderr},
                                          {"monotone", cmp.monotone}});
  return out;
}

CommandOutput cmd_edcheck(const RunConfig& cfg) {
  LatticeModel model = model_from_table(cfg.table);
  if (!cfg.table.has("model.lambda")) model.lambda = 0.3;
  const int L = cfg.table.integer("run.L", 4);
  const double beta = cfg.table.number("run.beta", 4.0);
  const ManyBodyEnsemble ens(model, L, beta);
  const json params{{"L", L}, {"beta", beta}, {"mu", model.mu}, {"lambda", model.lambda}};
  CommandOutput out;

  const double t = 0.3 * beta, s = 0.1 * beta;
  const double kms = kms_check(ens, ens.density(0), ens.observable(1, 1 % L), t, s);
  json kp = params;
  kp["t"] = t;
  kp["s"] = s;
  out.checks.push_back(CheckReport::make("kms", kp, kms, 0.0, kms, cfg.tolerance("kms", 1e-9)));

  const double eta_beta = 2.0 * pi / beta;
  for (int n : {1, 2}) {
    const WickRotationResult w = wick_rotation_check(ens, n, ens.observable(1, 0), ens.density(1 % L), eta_beta);
    json wp = params;
    wp["n"] = n;
    wp["eta_beta"] = eta_beta;
    out.checks.push_back(CheckReport::make(fmt::format("wick_rotation_n{}", n), wp, to_json(w.lhs), to_json(w.rhs),
                                           w.residual, cfg.tolerance(n == 1 ? "wick1" : "wick2", n == 1 ? 1e-8 : 1e-7)));
  }

  double cont = 0.0;
  for (int x = 0; x < L; ++x) cont = std::max(cont, continuity_check(ens, x));
  out.checks.push_back(CheckReport::make("continuity", params, cont, 0.0, cont, cfg.tolerance("continuity", 1e-12)));

  for (int nu : {0, 1}) {
    const cplx w = ward_p0_value(ens, eta_beta, nu);
    json wp = params;
    wp["nu"] = nu;
    wp["p0"] = eta_beta;
    out.checks.push_back(
        CheckReport::make(fmt::format("ward_p0_nu{}", nu), wp, to_json(w), 0.0, std::abs(w), cfg.tolerance("ward", 1e-9)));
  }
  json reports = json::array();
  for (const auto& c : out.checks) reports.push_back(c.to_json());
  out.files.add("edcheck.json", reports);
  return out;
}

CommandOutput cmd_bubble(const RunConfig& cfg) {
  const double v = cfg.table.number("run.v", 1.0);
  const auto p = momenta_from(cfg.table.numbers("run.p", {1.0, 0.5}), "run.p").front();
  const int N_lo = cfg.table.integer("run.N_lo", 8), N_hi = cfg.table.integer("run.N_hi", 12);
  const ReferenceGrid grid{cfg.table.number("run.beta", 4.0 * pi)};
  const auto rows = bubble_scan(v, p, N_lo, N_hi, grid);
  CsvTable csv({"N", "value_re", "value_im", "extrapolation_re", "extrapolation_im", "error"});
  for (const auto& r : rows)
    csv.row({Num::num(r.N), Num::num(r.value.real()), Num::num(r.value.imag()), Num::num(r.richardson.real()),
             Num::num(r.richardson.imag()), Num::num(r.error)});
  const json params{{"v", v}, {"p", {p.k0, p.k1}}, {"N", {N_lo, N_hi}}, {"beta", grid.beta}};
  CommandOutput out;
  const cplx exact = bubble_closed_form(p, v);
  out.checks.push_back(CheckReport::make("bubble_limit", params, to_json(rows.back().value), to_json(exact),
                                         rows.back().error, cfg.tolerance("bubble", 1e-3)));
  int violations = 0;
  for (std::size_t i = rows.size() >= 3 ? rows.size() - 2 : 1; i < rows.size(); ++i)
    violations += !(rows[i].error < rows[i - 1].error);
  out.checks.push_back(CheckReport::make("bubble_monotone", params, violations, 0, violations, 0.5));
  out.files.add("bubble.csv", csv);
  return out;
}

CommandOutput cmd_chiralloop(const RunConfig& cfg) {
  const double v = cfg.table.number("run.v", 1.0);
  const auto p = momenta_from(cfg.table.numbers("run.p", {0.5, 0.5, 0.5, -1.0}), "run.p");
  const int N_lo = cfg.table.integer("run.N_lo", 6), N_hi = cfg.table.integer("run.N_hi", 10);
  const ReferenceGrid grid{cfg.table.number("run.beta", 4.0 * pi)};
  const std::string shape_name = cfg.table.string("run.shape", "radial");
  if (shape_name != "radial" && shape_name != "anisotropic")
    throw Error(ErrorCode::ConfigInvalid, "run.shape must be radial or anisotropic");
  const CutoffShape shape = shape_name == "radial" ? CutoffShape::Radial : CutoffShape::Anisotropic;
  const LoopScan scan = chiral_loop_scan(v, shape, p, N_lo, N_hi, grid);
  CsvTable csv({"N", "value_re", "value_im", "abs", "single_ordering", "gamma_hat"});
  for (const auto& r : scan.rows)
    csv.row({Num::num(r.N), Num::num(r.value.real()), Num::num(r.value.imag()), Num::num(std::abs(r.value)),
             Num::num(r.single_ordering), Num::num(scan.gamma_hat)});
  const json params{{"v", v},       {"p", momenta_json(p)}, {"m", p.size() + 1},
                    {"N", {N_lo, N_hi}}, {"beta", grid.beta},  {"shape", shape_name}};
  CommandOutput out;
  auto c = CheckReport::at_least("loop_decay", params, scan.gamma_hat, cfg.table.number("run.gamma_min", 0.3));
  c.lhs = {{"gamma_hat", scan.gamma_hat}, {"stderr", scan.gamma_stderr}};
  out.checks.push_back(c);
  out.files.add("chiralloop.csv", csv);
  return out;
}

CommandOutput cmd_kmatrix(const RunConfig& cfg) {
  ResponseMatrixSet s;
  const auto v = cfg.table.numbers("run.v", {1.3, -1.3});
  const auto nf = static_cast<Eigen::Index>(v.size());
  const auto lam = cfg.table.numbers("run.Lambda", {0.0, 2.0, 2.0, 0.0});
  const auto Z = cfg.table.numbers("run.Z", std::vector<double>(v.size(), 1.0));
  if (static_cast<Eigen::Index>(lam.size()) != nf * nf || static_cast<Eigen::Index>(Z.size()) != nf)
    throw Error(ErrorCode::ConfigInvalid, "run.Lambda needs Nf² entries and run.Z needs Nf");
  s.v = Eigen::Map<const RVec>(v.data(), nf);
  s.Lambda = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(lam.data(), nf, nf);
  s.Z = Eigen::Map<const RVec>(Z.data(), nf);
  s.a = cfg.table.number("run.a", 1.0);
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  const auto qr = cfg.table.numbers("run.q", {-5.0, 5.0, 101});
  if (qr.size() != 3 || qr[2] < 2) throw Error(ErrorCode::ConfigInvalid, "run.q is [q_min, q_max, n]");
  const int nq = static_cast<int>(qr[2]);

  const bool two = nf == 2 && v[0] > 0 && v[1] == -v[0] && lam[1] == lam[2] && Z[0] == 1.0 && Z[1] == 1.0;
  CsvTable kcsv({"q", "nu", "omega", "omega_prime", "re", "im"});
  CsvTable scsv({"q", "sum_k0", "sum_k1_re", "sum_k1_im", "closed_k0", "closed_k1_re", "closed_k1_im"});
  double worst = 0.0;
  for (int i = 0; i < nq; ++i) {
    const double q = qr[0] + (qr[1] - qr[0]) * i / (nq - 1);
    const CMat K0 = k_nu(s, q, 0), K1 = k_nu(s, q, 1);
    for (int nu : {0, 1}) {
      const CMat& K = nu == 0 ? K0 : K1;
      for (Eigen::Index w = 0; w < nf; ++w)
        for (Eigen::Index w2 = 0; w2 < nf; ++w2)
          kcsv.row({Num::num(q), Num::num(nu), Num::num(static_cast<int>(w + 1)), Num::num(static_cast<int>(w2 + 1)),
                    Num::num(K(w, w2).real()), Num::num(K(w, w2).imag())});
    }
    if (two) {
      const auto c = two_chirality_closed_forms(v[0], lam[1], q, s.a);
      const cplx s0 = K0.sum(), s1 = K1.sum();
      worst = std::max({worst, std::abs(s0 - c.sum_k0), std::abs(s1 - c.sum_k1)});
      scsv.row({Num::num(q), Num::num(s0.real()), Num::num(s1.real()), Num::num(s1.imag()), Num::num(c.sum_k0),
                Num::num(c.sum_k1.real()), Num::num(c.sum_k1.imag())});
    }
  }
  CommandOutput out;
  const json params{{"v", v}, {"Lambda", lam}, {"Z", Z}, {"a", s.a}, {"q", qr}};
  if (two)
    out.checks.push_back(
        CheckReport::make("two_chirality_closed_form", params, worst, 0.0, worst, cfg.tolerance("closed_form", 1e-12)));
  out.files.add("kmatrix.csv", kcsv);
  if (two) out.files.add("kmatrix_sums.csv", scsv);

  if (cfg.table.has("run.x")) {
    const auto xs = cfg.table.numbers("run.x", {});
    const double theta = cfg.table.number("run.theta", 0.1);
    CsvTable ccsv({"x", "theta", "nu", "chi_lin", "imag", "quadrature_error"});
    double imag = 0.0;
    for (int nu : {0, 1})
      for (double x : xs) {
        const ChiLinResult r = chi_lin(s, x, theta, nu, mu_hat_bump);
        imag = std::max(imag, std::abs(r.imag));
        ccsv.row({Num::num(x), Num::num(theta), Num::num(nu), Num::num(r.value), Num::num(r.imag), Num::num(r.error)});
      }
    out.checks.push_back(CheckReport::make("chi_lin_real", params, imag, 0.0, imag, cfg.tolerance("reality", 1e-10)));
    out.files.add("chi_lin.csv", ccsv);
  }
  return out;
}

CommandOutput cmd_scaling(const RunConfig& cfg) {
  const LatticeModel model = model_from_table(cfg.table);
  const int L = cfg.table.integer("run.L", 512);
  const double beta = cfg.table.number("run.beta", 400.0);
  const auto etas = cfg.table.numbers("run.eta", {0.2, 0.1, 0.05});
  const double a = cfg.table.number("run.a", 1.0);
  const FreeTheory ft(model.hopping, model.mu, beta, L);

  struct Point {
    double eta;
    cplx v3, v4;
  };
  std::vector<Point> pts(etas.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    pts[i].eta = etas[i];
    pts[i].v3 = ft.m_point_density_loop(scaling_momenta(etas[i], a, beta, L, 3), 0).value;
    pts[i].v4 = ft.m_point_density_loop(scaling_momenta(etas[i], a, beta, L, 4), 0).value;
  });
  CsvTable csv({"eta", "eta_beta", "m", "value_re", "value_im", "abs"});
  for (const auto& p : pts)
    for (int m : {3, 4}) {
      const cplx z = m == 3 ? p.v3 : p.v4;
      csv.row({Num::num(p.eta), Num::num(matsubara_rate(p.eta, beta)), Num::num(m), Num::num(z.real()),
               Num::num(z.imag()), Num::num(std::abs(z))});
    }
  CommandOutput out;
  const json base{{"L", L}, {"beta", beta}, {"mu", model.mu}, {"a", a}};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (std::abs(pts[i].eta * 2.0 - pts[i - 1].eta) > 1e-12 * pts[i - 1].eta) continue;
    for (int m : {3, 4}) {
      const double r = m == 3 ? std::abs(pts[i].v3) / std::abs(pts[i - 1].v3) : std::abs(pts[i].v4) / std::abs(pts[i - 1].v4);
      const double law = m == 3 ? 2.0 : 4.0;
      json params = base;
      params["m"] = m;
      params["eta"] = {pts[i - 1].eta, pts[i].eta};
      out.checks.push_back(CheckReport::make(fmt::format("scaling_m{}", m), params, r, law, std::abs(r / law - 1.0),
                                             cfg.tolerance(m == 3 ? "scaling3" : "scaling4", m == 3 ? 0.3 : 0.4)));
    }
  }
  out.files.add("scaling.csv", csv);
  return out;
}

}  // namespace

std::string code_version() { return KUBO_VERSION; }

std::vector<Momentum2> scaling_momenta(double eta, double a, double beta, int L, int m) {
  if (m < 3) throw Error(ErrorCode::InvalidArgument, "scaling needs m >= 3");
  const double eb = matsubara_rate(eta, beta);
  std::vector<Momentum2> p;
  double c = 1.0;
  for (int i = 0; i + 1 < m; ++i, c *= -0.5) {
    long j = std::lround(c * a * eta * L / (2.0 * pi));
    if (j == 0) j = c > 0 ? 1 : -1;
    p.push_back({eb, 2.0 * pi * double(j) / L});
  }
  return p;
}

bool RunRecord::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.pass; });
}

json RunRecord::to_json() const {
  json cs = json::array();
  for (const auto& c : checks) cs.push_back(c.to_json());
  return {{"command", command},       {"config_hash", config_hash}, {"code_version", code_version},
          {"wall_clock_s", wall_clock_s}, {"checks", cs},            {"artifacts", artifacts},
          {"pass", all_pass()}};
}

CommandOutput execute(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.command == "spectrum") return cmd_spectrum(cfg);
  if (cfg.command == "fermi") return cmd_fermi(cfg);
  if (cfg.command == "kubo-scan") return cmd_kubo_scan(cfg);
  if (cfg.command == "edcheck") return cmd_edcheck(cfg);
  if (cfg.command == "bubble") return cmd_bubble(cfg);
  if (cfg.command == "chiralloop") return cmd_chiralloop(cfg);
  if (cfg.command == "kmatrix") return cmd_kmatrix(cfg);
  return cmd_scaling(cfg);
}

RunRecord run(const RunConfig& cfg) {
  if (cfg.jobs > 0) set_default_jobs(cfg.jobs);
  const auto start = std::chrono::steady_clock::now();
  CommandOutput out = execute(cfg);
  RunRecord rec;
  rec.command = cfg.command;
  rec.config_hash = cfg.hash();
  rec.code_version = code_version();
  rec.checks = std::move(out.checks);
  rec.artifacts = out.files.names();
  rec.artifacts.push_back("record.json");
  rec.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.files.add("record.json", rec.to_json());
  out.files.commit(cfg.out_dir);
  return rec;
}

}  // namespace kubo
