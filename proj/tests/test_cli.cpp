#include "app.hpp"
#include "wml/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wml::app;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("wml_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_with(const std::string& cmd, const json& config, const fs::path& out, Overrides flags = {},
             std::vector<std::string> inputs = {}) {
  const fs::path cfg = out / (cmd + "_config.json");
  wml::io::write_file(cfg, config.dump());
  flags.out = out.string();
  return run(load_config(cmd, cfg.string(), flags, std::move(inputs)));
}

json read_json(const fs::path& p) { return json::parse(wml::io::read_file(p)); }

}  // namespace

TEST_CASE("gen writes a dyadic space") {
  TempDir t;
  Overrides o;
  o.depth = 4;
  CHECK(run_with("gen", json::object(), t.path, o) == kExitOk);
  const auto space = wml::FilteredSpace::from_tree(wml::io::tree_from_json(wml::io::read_file(t.path / "space.json")));
  CHECK(space.num_leaves() == 16);
  CHECK(read_json(t.path / "gen_meta.json")["seed"] == 7);

  CHECK(run_with("gen", {{"gen", {{"kind", "random"}}}, {"seed", 3}}, t.path, o) == kExitOk);
  CHECK(fs::exists(t.path / "weight.csv"));
  CHECK(fs::exists(t.path / "function.csv"));
  CHECK(run_with("gen", {{"gen", {{"kind", "bogus"}}}}, t.path) == kExitUsage);
  CHECK(run_with("gen", {{"gen", {{"depth", "four"}}}}, t.path) == kExitUsage);
}

TEST_CASE("check on files and on a small suite") {
  TempDir t;
  Overrides o;
  o.depth = 5;
  o.d = 2;
  o.p = 3.0;
  REQUIRE(run_with("gen", {{"gen", {{"kind", "random"}}}}, t.path, o) == kExitOk);
  const json files = {{"check",
                       {{"space", (t.path / "space.json").string()},
                        {"weight", (t.path / "weight.csv").string()},
                        {"function", (t.path / "function.csv").string()},
                        {"p", 3.0}}}};
  CHECK(run_with("check", files, t.path) == kExitOk);
  const json fam = read_json(t.path / "family.json");
  CHECK(fam.contains("sets"));
  CHECK(read_json(t.path / "reducers.json")["p"] == 3.0);
  CHECK(read_json(t.path / "check_report.json")["pass"] == true);

  json missing = files;
  missing["check"]["weight"] = (t.path / "nope.csv").string();
  CHECK(run_with("check", missing, t.path) == kExitUsage);

  const json suite = {{"check", {{"instances", 6}, {"min_depth", 5}, {"max_depth", 5}}}};
  CHECK(run_with("check", suite, t.path) == kExitOk);
  Overrides bad;
  bad.cgamma = 0.1;
  CHECK(run_with("check", suite, t.path, bad) == kExitInvariant);
  const json rep = read_json(t.path / "check_report.json");
  CHECK(rep["pass"] == false);
  bool halving_failed = false;
  for (const auto& l : rep["checks"])
    if (l["name"] == "halving") halving_failed = l["pass"] == false;
  CHECK(halving_failed);
}

TEST_CASE("sweep is deterministic and fit reads it back") {
  TempDir t;
  const json cfg = {{"seed", 11}, {"sweep", {{"depths", {4, 5}}, {"alphas", {0.25, 0.75, 1.25}}}}};
  const fs::path a = t.path / "a", b = t.path / "b";
  fs::create_directories(a);
  fs::create_directories(b);
  CHECK(run_with("sweep", cfg, a) == kExitOk);
  Overrides two;
  two.parallel = 2;
  CHECK(run_with("sweep", cfg, b, two) == kExitOk);
  CHECK(wml::io::read_file(a / "sweep.csv") == wml::io::read_file(b / "sweep.csv"));
  CHECK(read_json(a / "fit.json")["seed"] == 11);

  CHECK(run_with("fit", json::object(), t.path, {}, {(a / "sweep.csv").string()}) == kExitOk);
  CHECK(read_json(t.path / "fit.json")["slope"] == read_json(a / "fit.json")["slope"]);

  CHECK(run_with("report", json::object(), t.path, {}, {(a / "sweep.csv").string()}) == kExitOk);
  const std::string report = wml::io::read_file(t.path / "report.txt");
  CHECK(report.find("scalar target exponent") != std::string::npos);
  CHECK(fs::exists(t.path / "report_points.csv"));

  CHECK(run_with("sweep", {{"sweep", {{"alphas", json::array()}}}}, t.path) == kExitUsage);
}

TEST_CASE("fit on a synthetic slope-one CSV") {
  TempDir t;
  std::string csv = "id,family,p,d,depth,alpha,eps,ap_char,ratio,iterations,restarts,status\n";
  for (int i = 0; i < 8; ++i) {
    const double a = std::pow(2.0, i);
    csv += std::to_string(i) + ",power,2,1,6,0,0.1," + std::to_string(a) + "," + std::to_string(5 * a) + ",1,1,ok\n";
  }
  wml::io::write_file(t.path / "syn.csv", csv);
  CHECK(run_with("fit", json::object(), t.path, {}, {(t.path / "syn.csv").string()}) == kExitOk);
  CHECK(read_json(t.path / "fit.json")["slope"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(run_with("fit", json::object(), t.path, {}, {(t.path / "none.csv").string()}) == kExitUsage);
  CHECK(run_with("fit", json::object(), t.path) == kExitUsage);
}

TEST_CASE("seed resolution") {
  Overrides o;
  RunConfig c = load_config("gen", std::nullopt, o, {});
  ::setenv("WML_SEED", "42", 1);
  CHECK(c.seed() == 42);
  ::unsetenv("WML_SEED");
  CHECK(c.seed() == 7);
  c.file = {{"seed", 5}};
  CHECK(c.seed() == 5);
  c.flags.seed = 9;
  CHECK(c.seed() == 9);
}
