#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kubo/types.hpp"

namespace kubo {

using json = nlohmann::json;

/// One identity check: {check, params, lhs, rhs, residual, tolerance, pass}.
struct CheckReport {
  std::string check;
  json params = json::object();
  json lhs;
  json rhs;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;

  /// pass = residual < tolerance (NaN fails).
  static CheckReport make(std::string name, json params, json lhs, json rhs, double residual, double tolerance);
  /// pass = value ≥ bound; residual holds the value and tolerance the bound.
  static CheckReport at_least(std::string name, json params, double value, double bound);
  json to_json() const;
};

json to_json(cplx z);

/// Comma-separated table; numbers are written with 17 significant digits.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  CsvTable& row(const std::vector<std::string>& cells);
  static std::string num(double x);
  static std::string num(int x);
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Files staged in memory and written together. commit writes each file to a temporary name and
/// renames it into place; if anything fails, files already renamed by this commit are removed.
class ArtifactSet {
 public:
  void add(std::string name, std::string content);
  void add(std::string name, const CsvTable& t) { add(std::move(name), t.str()); }
  void add(std::string name, const json& j) { add(std::move(name), j.dump(2) + "\n"); }
  std::vector<std::string> names() const;
  /// Returns the written paths.
  std::vector<std::string> commit(const std::string& dir) const;

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace kubo
