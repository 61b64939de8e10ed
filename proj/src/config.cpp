#include "kubo/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "kubo/errors.hpp"

namespace kubo {

namespace {

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw Error(ErrorCode::ConfigInvalid, fmt::format("{}:{}: {}", origin, line, msg));
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool valid_key(const std::string& k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

std::optional<double> parse_number(const std::string& s) {
  std::string t;
  for (char c : s)
    if (c != '_') t += c;
  if (t == "inf" || t == "+inf") return HUGE_VAL;
  if (t == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const char* first = t.data();
  if (!t.empty() && t[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
  return v;
}

std::optional<std::string> parse_string(const std::string& s) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') return std::nullopt;
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i] == '\\' && i + 2 < s.size()) {
      const char c = s[++i];
      out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
    } else if (s[i] == '"') {
      return std::nullopt;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::vector<std::string> split_array(const std::string& inner) {
  std::vector<std::string> items;
  std::string cur;
  bool quoted = false;
  for (char c : inner) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(trim(cur));
  return items;
}

ConfigValue parse_value(const std::string& raw, const std::string& origin, int line) {
  const std::string s = trim(raw);
  if (s.empty()) fail(origin, line, "missing value");
  if (s == "true") return true;
  if (s == "false") return false;
  if (auto str = parse_string(s)) return *str;
  if (s.front() == '[') {
    if (s.back() != ']') fail(origin, line, "arrays must close on the same line");
    const auto items = split_array(s.substr(1, s.size() - 2));
    if (!items.empty() && items.front().front() == '"') {
      std::vector<std::string> out;
      for (const auto& it : items) {
        auto v = parse_string(it);
        if (!v) fail(origin, line, "mixed or malformed string array");
        out.push_back(*v);
      }
      return out;
    }
    std::vector<double> out;
    for (const auto& it : items) {
      auto v = parse_number(it);
      if (!v) fail(origin, line, "bad array element '" + it + "'");
      out.push_back(*v);
    }
    return out;
  }
  if (auto v = parse_number(s)) return *v;
  fail(origin, line, "cannot parse value '" + s + "'");
}

std::string render(const ConfigValue& v) {
  struct {
    std::string operator()(double x) const { return fmt::format("{}", x); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(const std::string& s) const { return fmt::format("\"{}\"", s); }
    std::string operator()(const std::vector<double>& xs) const { return fmt::format("[{}]", fmt::join(xs, ", ")); }
    std::string operator()(const std::vector<std::string>& xs) const {
      std::string out = "[";
      for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", \"" : "\"") + xs[i] + "\"";
      return out + "]";
    }
  } visitor;
  return std::visit(visitor, v);
}

[[noreturn]] void wrong_type(const std::string& key, const char* want) {
  throw Error(ErrorCode::ConfigInvalid, fmt::format("'{}' must be {}", key, want));
}

}  // namespace

ConfigTable ConfigTable::parse(const std::string& text, const std::string& origin) {
  ConfigTable t;
  std::istringstream in(text);
  std::string line, section;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) fail(origin, n, "malformed table header");
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_key(section)) fail(origin, n, "bad table name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(origin, n, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (!valid_key(key)) fail(origin, n, "bad key '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (t.has(full)) fail(origin, n, "duplicate key '" + full + "'");
    t.values_[full] = parse_value(s.substr(eq + 1), origin, n);
  }
  return t;
}

ConfigTable ConfigTable::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::ConfigInvalid, "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

const ConfigValue* ConfigTable::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

double ConfigTable::number(const std::string& key, double fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (const auto* d = std::get_if<double>(v)) return *d;
  wrong_type(key, "a number");
}

int ConfigTable::integer(const std::string& key, int fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  const auto* d = std::get_if<double>(v);
  if (!d || *d != std::floor(*d) || std::abs(*d) > 1e9) wrong_type(key, "an integer");
  return static_cast<int>(*d);
}

bool ConfigTable::boolean(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (const auto* b = std::get_if<bool>(v)) return *b;
  wrong_type(key, "a boolean");
}

std::string ConfigTable::string(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (const auto* s = std::get_if<std::string>(v)) return *s;
  wrong_type(key, "a string");
}

std::vector<double> ConfigTable::numbers(const std::string& key, const std::vector<double>& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (const auto* xs = std::get_if<std::vector<double>>(v)) return *xs;
  if (const auto* d = std::get_if<double>(v)) return {*d};
  wrong_type(key, "an array of numbers");
}

std::string ConfigTable::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + render(v) + "\n";
  return out;
}

LatticeModel model_from_table(const ConfigTable& t) {
  LatticeModel m;
  const std::string kind = t.string("model.hopping", "laplacian");
  if (kind == "laplacian") {
    m.hopping = BlochHamiltonian::laplacian(t.number("model.t", 1.0));
  } else if (kind == "blocks") {
    const int M = t.integer("model.M", 1);
    const auto flat = t.numbers("model.blocks", {});
    if (M <= 0 || flat.empty() || flat.size() % static_cast<std::size_t>(M * M) != 0)
      throw Error(ErrorCode::ConfigInvalid, "model.blocks must hold (R+1)·M² entries");
    std::vector<CMat> blocks;
    for (std::size_t off = 0; off < flat.size(); off += static_cast<std::size_t>(M * M)) {
      CMat b(M, M);
      for (int r = 0; r < M; ++r)
        for (int c = 0; c < M; ++c) b(r, c) = flat[off + static_cast<std::size_t>(r * M + c)];
      blocks.push_back(b);
    }
    m.hopping = BlochHamiltonian(M, std::move(blocks));
  } else {
    throw Error(ErrorCode::ConfigInvalid, "model.hopping must be \"laplacian\" or \"blocks\"");
  }
  if (t.has("model.potential")) m.potential = TwoBodyPotential(t.numbers("model.potential", {}));
  else m.potential = TwoBodyPotential::nearest_neighbour(1.0);
  m.mu = t.number("model.mu", 2.0);
  m.lambda = t.number("model.lambda", 0.0);
  return m;
}

const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> cmds{"spectrum", "fermi",      "kubo-scan", "edcheck",
                                             "bubble",   "chiralloop", "kmatrix",   "scaling"};
  return cmds;
}

double RunConfig::tolerance(const std::string& name, double fallback) const {
  return tolerance_scale * table.number("tolerances." + name, fallback);
}

void RunConfig::validate() const {
  const auto& cmds = known_commands();
  if (std::find(cmds.begin(), cmds.end(), command) == cmds.end())
    throw Error(ErrorCode::ConfigInvalid, "unknown command '" + command + "'");
  if (!(tolerance_scale > 0.0)) throw Error(ErrorCode::ConfigInvalid, "tolerance scale must be positive");
  for (const auto& [k, v] : table.values()) {
    if (k.rfind("tolerances.", 0) == 0) {
      const auto* d = std::get_if<double>(&v);
      if (!d || !(*d > 0.0)) throw Error(ErrorCode::ConfigInvalid, "'" + k + "' must be a positive number");
    }
  }
  if (table.has("run.eta")) {
    const auto etas = table.numbers("run.eta", {});
    if (etas.empty()) throw Error(ErrorCode::ConfigInvalid, "empty eta list");
    for (std::size_t i = 0; i < etas.size(); ++i) {
      if (!(etas[i] > 0.0)) throw Error(ErrorCode::ConfigInvalid, "eta must be positive");
      if (i > 0 && !(etas[i] < etas[i - 1])) throw Error(ErrorCode::ConfigInvalid, "eta list must be sorted descending");
    }
  }
  if (table.has("run.a") && !(table.number("run.a", 1.0) > 0.0))
    throw Error(ErrorCode::ConfigInvalid, "a must be positive");
  if (table.has("run.nu")) {
    const int nu = table.integer("run.nu", 0);
    if (nu != 0 && nu != 1) throw Error(ErrorCode::ConfigInvalid, "nu must be 0 or 1");
  }
}

std::string RunConfig::hash() const {
  const std::string text = command + "\n" + table.canonical();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

RunConfig load_run_config(const std::string& command, const std::optional<std::string>& path) {
  RunConfig rc;
  rc.command = command;
  if (path) {
    rc.table = ConfigTable::load(*path);
    if (rc.table.has("model_file")) {
      std::filesystem::path mf = rc.table.string("model_file", "");
      if (mf.is_relative()) mf = std::filesystem::path(*path).parent_path() / mf;
      if (!std::filesystem::exists(mf)) throw Error(ErrorCode::ModelFileMissing, mf.string());
      const ConfigTable model = ConfigTable::load(mf.string());
      for (const auto& [k, v] : model.values()) {
        const std::string key = k.rfind("model.", 0) == 0 ? k : "model." + k;
        if (!rc.table.has(key)) rc.table.set(key, v);
      }
    }
  }
  rc.validate();
  return rc;
}

}  // namespace kubo
