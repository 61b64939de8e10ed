#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kubo/commands.hpp"
#include "kubo/errors.hpp"

using namespace kubo;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::CheckFailed;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("kubo_test_" + std::to_string(std::rand()) + std::to_string(++counter));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
  static inline int counter = 0;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunConfig config(const std::string& command, const std::string& text) {
  RunConfig rc;
  rc.command = command;
  rc.table = ConfigTable::parse(text);
  rc.validate();
  return rc;
}

const std::string kSmallBubble = "[run]\nN_lo = 4\nN_hi = 5\nbeta = 50.26548245743669\n";

const CheckReport* find_check(const std::vector<CheckReport>& cs, const std::string& name) {
  for (const auto& c : cs)
    if (c.check == name) return &c;
  return nullptr;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto t = ConfigTable::parse(R"(
# comment
model_file = "chain.toml"
[run]
L = 64            # trailing comment
beta = 1.5e2
half = 2.5
eta = [0.2, 0.1, 0.05]
shape = "radial"
verbose = true
names = ["a", "b"]
[tolerances]
kms = 1e-9
)");
  CHECK(t.string("model_file", "") == "chain.toml");
  CHECK(t.integer("run.L", 0) == 64);
  CHECK(t.number("run.beta", 0) == 150.0);
  CHECK(t.numbers("run.eta", {}) == std::vector<double>{0.2, 0.1, 0.05});
  CHECK(t.string("run.shape", "") == "radial");
  CHECK(t.boolean("run.verbose", false));
  CHECK(t.number("run.missing", 7.0) == 7.0);
  CHECK(t.number("tolerances.kms", 0) == 1e-9);
  CHECK(code_of([&] { t.integer("run.half", 0); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { t.number("run.shape", 0); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("config syntax errors") {
  for (const char* bad : {"[run\nL = 1", "L 1", "L = [1, 2", "L = \"open", "L = 1x", "L = 1\nL = 2"})
    CHECK(code_of([&] { ConfigTable::parse(bad); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("run configuration validation") {
  CHECK_NOTHROW(config("kubo-scan", "[run]\neta = [0.2, 0.1]"));
  CHECK(code_of([] { config("kubo-scan", "[run]\neta = []"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { config("kubo-scan", "[run]\neta = [0.1, 0.2]"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { config("kubo-scan", "[run]\na = 0"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { config("kubo-scan", "[run]\nnu = 2"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { config("kubo-scan", "[tolerances]\nkms = -1"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { config("nonsense", ""); }) == ErrorCode::ConfigInvalid);
  auto rc = config("edcheck", "[tolerances]\nkms = 1e-9");
  rc.tolerance_scale = 10.0;
  CHECK(rc.tolerance("kms", 1.0) == doctest::Approx(1e-8));
  CHECK(rc.tolerance("other", 2.0) == doctest::Approx(20.0));
}

TEST_CASE("config hash is deterministic") {
  const auto a = config("bubble", "[run]\nv = 1.0\nN = [8, 9]\n");
  const auto b = config("bubble", "# same\n[run]\nN = [8.0, 9]\nv = 1\n");
  const auto c = config("bubble", "[run]\nv = 1.0\nN = [8, 10]\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash() != config("chiralloop", "[run]\nv = 1.0\nN = [8, 9]\n").hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("model file") {
  TempDir d;
  d.write("chain.toml", "hopping = \"laplacian\"\nmu = 1.3\nlambda = 0.2\npotential = [0.0, 0.5]\n");
  const auto cfg = d.write("run.toml", "model_file = \"chain.toml\"\n[model]\nmu = 0.9\n");
  const RunConfig rc = load_run_config("fermi", cfg.string());
  const LatticeModel m = model_from_table(rc.table);
  CHECK(m.mu == 0.9);
  CHECK(m.lambda == 0.2);
  const auto missing = d.write("bad.toml", "model_file = \"nowhere.toml\"\n");
  CHECK(code_of([&] { load_run_config("fermi", missing.string()); }) == ErrorCode::ModelFileMissing);
}

TEST_CASE("kmatrix reproduces the two-chirality closed form") {
  const auto out = execute(config("kmatrix", "[run]\nv = [1.3, -1.3]\nLambda = [0, 2, 2, 0]\nx = [0, 3]\n"));
  const auto* c = find_check(out.checks, "two_chirality_closed_form");
  REQUIRE(c);
  CHECK(c->pass);
  CHECK(c->residual < 1e-12);
  REQUIRE(find_check(out.checks, "chi_lin_real"));
  CHECK(find_check(out.checks, "chi_lin_real")->pass);
  CHECK(out.files.names() == std::vector<std::string>{"kmatrix.csv", "kmatrix_sums.csv", "chi_lin.csv"});
}

TEST_CASE("edcheck default configuration passes") {
  const auto out = execute(config("edcheck", ""));
  CHECK(out.checks.size() >= 6);
  for (const auto& c : out.checks) {
    INFO(c.check, " residual ", c.residual, " tolerance ", c.tolerance);
    CHECK(c.pass);
  }
}

TEST_CASE("runs are reproducible and record their checks") {
  TempDir d;
  auto rc = config("bubble", kSmallBubble);
  rc.out_dir = (d.path / "a").string();
  const RunRecord r1 = run(rc);
  rc.out_dir = (d.path / "b").string();
  const RunRecord r2 = run(rc);
  CHECK(r1.config_hash == r2.config_hash);
  CHECK(r1.code_version == code_version());
  CHECK(slurp(d.path / "a" / "bubble.csv") == slurp(d.path / "b" / "bubble.csv"));
  const json rec = json::parse(slurp(d.path / "a" / "record.json"));
  CHECK(rec["config_hash"] == r1.config_hash);
  CHECK(rec["checks"].size() == r1.checks.size());
  CHECK(fs::exists(d.path / "a" / "bubble.csv"));
}

TEST_CASE("artifact commit is all or nothing") {
  TempDir d;
  ArtifactSet set;
  set.add("first.csv", std::string("x\n1\n"));
  set.add("second.csv", std::string("y\n2\n"));
  // A non-empty directory where the second file should go makes the rename fail.
  fs::create_directories(d.path / "second.csv" / "blocker");
  CHECK_THROWS(set.commit(d.path.string()));
  CHECK_FALSE(fs::exists(d.path / "first.csv"));
  for (const auto& e : fs::directory_iterator(d.path)) CHECK(e.path().filename() == "second.csv");
}

TEST_CASE("csv numbers round-trip") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23}) CHECK(std::stod(CsvTable::num(x)) == x);
  CsvTable t({"a", "b"});
  t.row({"1", "2"});
  CHECK(t.str() == "a,b\n1,2\n");
}

#ifdef KUBO1D_PATH
TEST_CASE("command-line exit codes") {
  TempDir d;
  const std::string bin = KUBO1D_PATH;
  auto status = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + " > " + (d.path / "log").string() + " 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  const auto good = d.write("k.toml", "[run]\nq = [-1, 1, 5]\n");
  CHECK(status("kmatrix --config " + good.string() + " --out " + (d.path / "ok").string()) == 0);
  CHECK(fs::exists(d.path / "ok" / "record.json"));
  // At N = 5 the bubble is about 1e-4 off its limit.
  const auto coarse = d.write("b.toml", kSmallBubble + "[tolerances]\nbubble = 1e-5\n");
  CHECK(status("bubble --config " + coarse.string() + " --out " + (d.path / "f").string()) == 1);
  CHECK(fs::exists(d.path / "f" / "bubble.csv"));
  const auto empty = d.write("e.toml", "[run]\neta = []\n");
  CHECK(status("kubo-scan --config " + empty.string() + " --out " + (d.path / "e").string()) == 2);
  CHECK_FALSE(fs::exists(d.path / "e"));
}
#endif
