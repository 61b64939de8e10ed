#include "kubo/artifacts.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "kubo/errors.hpp"

namespace kubo {

namespace fs = std::filesystem;

CheckReport CheckReport::make(std::string name, json params, json lhs, json rhs, double residual, double tolerance) {
  CheckReport r;
  r.check = std::move(name);
  r.params = std::move(params);
  r.lhs = std::move(lhs);
  r.rhs = std::move(rhs);
  r.residual = residual;
  r.tolerance = tolerance;
  r.pass = residual < tolerance;
  return r;
}

CheckReport CheckReport::at_least(std::string name, json params, double value, double bound) {
  CheckReport r = make(std::move(name), std::move(params), value, bound, value, bound);
  r.pass = value >= bound;
  return r;
}

json CheckReport::to_json() const {
  return {{"check", check}, {"params", params}, {"lhs", lhs},  {"rhs", rhs},
          {"residual", std::isfinite(residual) ? json(residual) : json(nullptr)},
          {"tolerance", tolerance}, {"pass", pass}};
}

json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

CsvTable& CsvTable::row(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size()) throw Error(ErrorCode::InvalidArgument, "CSV row width mismatch");
  rows_.push_back(cells);
  return *this;
}

std::string CsvTable::num(double x) { return fmt::format("{:.17g}", x); }
std::string CsvTable::num(int x) { return std::to_string(x); }

std::string CsvTable::str() const {
  std::string out = fmt::format("{}\n", fmt::join(header_, ","));
  for (const auto& r : rows_) out += fmt::format("{}\n", fmt::join(r, ","));
  return out;
}

void ArtifactSet::add(std::string name, std::string content) {
  if (name.empty() || name.find('/') != std::string::npos)
    throw Error(ErrorCode::InvalidArgument, "artifact names are plain file names");
  files_.emplace_back(std::move(name), std::move(content));
}

std::vector<std::string> ArtifactSet::names() const {
  std::vector<std::string> out;
  for (const auto& f : files_) out.push_back(f.first);
  return out;
}

std::vector<std::string> ArtifactSet::commit(const std::string& dir) const {
  fs::create_directories(dir);
  std::vector<std::string> done;
  try {
    for (const auto& [name, content] : files_) {
      const fs::path target = fs::path(dir) / name;
      const fs::path tmp = fs::path(dir) / ("." + name + ".tmp");
      {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        f << content;
        f.flush();
        if (!f) {
          fs::remove(tmp);
          throw Error(ErrorCode::InvalidArgument, "cannot write " + tmp.string());
        }
      }
      std::error_code ec;
      fs::rename(tmp, target, ec);
      if (ec) {
        fs::remove(tmp);
        throw Error(ErrorCode::InvalidArgument, "cannot move " + tmp.string() + " into place: " + ec.message());
      }
      done.push_back(target.string());
    }
  } catch (...) {
    for (const auto& p : done) fs::remove(p);
    throw;
  }
  return done;
}

}  // namespace kubo
