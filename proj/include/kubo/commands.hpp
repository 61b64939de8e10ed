#pragma once

#include <string>
#include <vector>

#include "kubo/artifacts.hpp"
#include "kubo/config.hpp"

namespace kubo {

struct RunRecord {
  std::string command;
  std::string config_hash;
  std::string code_version;
  double wall_clock_s = 0.0;
  std::vector<CheckReport> checks;
  std::vector<std::string> artifacts;

  bool all_pass() const;
  json to_json() const;
};

struct CommandOutput {
  std::vector<CheckReport> checks;
  ArtifactSet files;
};

/// Runs one command without touching the file system.
CommandOutput execute(const RunConfig& cfg);

/// execute, then writes the artifacts and record.json into cfg.out_dir in one commit.
RunRecord run(const RunConfig& cfg);

/// Insertion momenta for the m-point scaling law: p_i = (η_β, round(c_i a η L/2π)·2π/L) for
/// i < m with c = 1, -1/2, 1/4, ...; the last insertion takes minus the sum.
std::vector<Momentum2> scaling_momenta(double eta, double a, double beta, int L, int m);

std::string code_version();

}  // namespace kubo
