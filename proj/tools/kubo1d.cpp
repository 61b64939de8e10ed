#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "kubo/commands.hpp"
#include "kubo/errors.hpp"

// Exit codes: 0 all checks pass, 1 a check failed, 2 bad configuration, 3 computation error.
int main(int argc, char** argv) {
  CLI::App app{"Linear-response checks for one-dimensional lattice fermions"};
  app.require_subcommand(1);
  std::string config_path, out_dir = ".";
  unsigned jobs = 0;
  double tol_scale = 1.0;
  app.add_option("--config", config_path, "TOML run configuration");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs, "worker threads (0: all cores)");
  app.add_option("--tolerance-scale", tol_scale, "multiplies every tolerance")->check(CLI::PositiveNumber);
  const std::map<std::string, std::string> about{
      {"spectrum", "Bloch bands on a momentum grid"},
      {"fermi", "Fermi points, velocities and the elastic-scattering assumptions"},
      {"kubo-scan", "full vs linear response of the driven free chain over a list of eta"},
      {"edcheck", "KMS, Wick rotation, continuity and Ward identities by exact diagonalization"},
      {"bubble", "anomalous bubble of the chiral reference model against its limit"},
      {"chiralloop", "decay of the free chiral m-point loop with the cutoff scale"},
      {"kmatrix", "K matrices over a q grid, and chi_lin at given sites"},
      {"scaling", "eta scaling of the 3- and 4-point density loops"},
  };
  for (const auto& c : kubo::known_commands()) {
    const auto it = about.find(c);
    app.add_subcommand(c, it == about.end() ? "" : it->second)->fallthrough();
  }
  app.fallthrough();
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    kubo::RunConfig cfg = kubo::load_run_config(
        command, config_path.empty() ? std::nullopt : std::optional<std::string>(config_path));
    cfg.out_dir = out_dir;
    cfg.jobs = jobs;
    cfg.tolerance_scale = tol_scale;
    const kubo::RunRecord rec = kubo::run(cfg);
    for (const auto& c : rec.checks)
      fmt::print("{:<28} {:<4} residual {:.3e} tolerance {:.3e}\n", c.check, c.pass ? "ok" : "FAIL", c.residual,
                 c.tolerance);
    fmt::print("{} checks, config {}, {:.1f} s, artifacts in {}\n", rec.checks.size(), rec.config_hash,
               rec.wall_clock_s, out_dir);
    if (!rec.all_pass()) {
      std::cerr << kubo::to_string(kubo::ErrorCode::CheckFailed) << ":";
      for (const auto& c : rec.checks)
        if (!c.pass) std::cerr << " " << c.check;
      std::cerr << "\n";
      return 1;
    }
    return 0;
  } catch (const kubo::Error& e) {
    std::cerr << e.what() << "\n";
    const bool config = e.code() == kubo::ErrorCode::ConfigInvalid || e.code() == kubo::ErrorCode::ModelFileMissing;
    return config ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }
}
