#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kubo/lattice_model.hpp"

namespace kubo {

/// Value of the TOML subset used by run configurations: numbers, booleans, strings and
/// one-line arrays of numbers or strings.
using ConfigValue = std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>>;

/// Flat table keyed by "section.key" (or "key" before the first header).
class ConfigTable {
 public:
  static ConfigTable parse(const std::string& text, const std::string& origin = "<string>");
  static ConfigTable load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, ConfigValue v) { values_[key] = std::move(v); }
  const std::map<std::string, ConfigValue>& values() const { return values_; }

  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;

  /// Deterministic text form: sorted keys, round-trip number formatting.
  std::string canonical() const;

 private:
  const ConfigValue* find(const std::string& key) const;
  std::map<std::string, ConfigValue> values_;
};

/// [model] section: hopping = "laplacian" with t, or "blocks" with a list of real scalar
/// hoppings h0, h1, ...; potential = [w0, w1, ...]; mu; lambda.
LatticeModel model_from_table(const ConfigTable& t);

struct RunConfig {
  std::string command;
  ConfigTable table;
  std::string out_dir = ".";
  unsigned jobs = 0;
  double tolerance_scale = 1.0;

  /// Tolerance `name` from [tolerances], scaled.
  double tolerance(const std::string& name, double fallback) const;
  /// Throws ConfigInvalid: empty or unsorted η list, nonpositive a or tolerances, unknown command.
  void validate() const;
  /// FNV-1a 64 of the command and canonical table, hex.
  std::string hash() const;
};

/// Reads the config file, merges the optional model file (ModelFileMissing if absent) and applies
/// command-line overrides.
RunConfig load_run_config(const std::string& command, const std::optional<std::string>& path);

const std::vector<std::string>& known_commands();

}  // namespace kubo
