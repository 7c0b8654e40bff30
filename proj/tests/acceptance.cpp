// Acceptance runner: one pass/fail line per criterion.
//   acceptance --criterion N [--cache FILE]
//   acceptance --prepare --cache FILE     (runs the random suite once and stores the summary)

#include "app.hpp"
#include "wml/experiments.hpp"
#include "wml/io.hpp"
#include "wml/suite.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wml;

namespace {

constexpr std::uint64_t kSuiteSeed = 7;
constexpr int kSuiteInstances = 1000;
constexpr int kCertifyDirections = 1000;
constexpr double kRuntimeBudget = 300.0;   // seconds, single core
constexpr double kDenseTol = 1e-6;
constexpr double kWeightedExpectTol = 1e-12;
constexpr double kConjugationTol = 1e-10;
constexpr int kMinProbePoints = 12;

struct Outcome {
  bool pass = true;
  std::string detail;
  void add(bool ok, const std::string& what) {
    pass = pass && ok;
    detail += std::string(ok ? "  ok    " : "  FAIL  ") + what + "\n";
  }
};

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

json run_suite_json() {
  SuiteOptions opts;
  opts.certify_directions = kCertifyDirections;
  const auto reports = run_suite(kSuiteSeed, kSuiteInstances, InstanceSpec{}, opts, 1);
  const SuiteSummary s = summarize(reports, opts);
  json j;
  j["seed"] = kSuiteSeed;
  j["instances"] = s.instances;
  j["seconds"] = s.seconds;
  j["certify_seconds"] = s.certify_seconds;
  j["cgamma"] = opts.cgamma;
  j["k_dom"] = k_domination(opts.cgamma);
  for (const CheckLine& l : s.lines)
    j["lines"][l.name] = {{"pass", l.pass}, {"measured", l.measured}, {"bound", l.bound}, {"detail", l.detail}};
  return j;
}

json load_suite(const std::optional<std::string>& cache) {
  if (cache && fs::exists(*cache)) {
    json j = json::parse(io::read_file(*cache));
    if (j.value("instances", 0) == kSuiteInstances && j.value("seed", 0ULL) == kSuiteSeed) return j;
  }
  json j = run_suite_json();
  if (cache) io::write_file(*cache, j.dump(1));
  return j;
}

void suite_line(Outcome& out, const json& suite, const std::string& name) {
  const json& l = suite.at("lines").at(name);
  out.add(l.at("pass").get<bool>(), name + ": measured " + num(l.at("measured")) + ", bound " + num(l.at("bound")) +
                                        "; " + l.at("detail").get<std::string>());
}

Outcome criterion_from_suite(int n, const json& suite) {
  Outcome out;
  out.detail = "  suite: " + std::to_string(suite.at("instances").get<int>()) + " instances, seed " +
               std::to_string(suite.at("seed").get<std::uint64_t>()) + "\n";
  switch (n) {
    case 1: {
      suite_line(out, suite, "properties");
      const double secs = suite.at("seconds");
      out.add(secs < kRuntimeBudget, "runtime " + num(secs) + " s (certification excluded, " +
                                         num(suite.at("certify_seconds")) + " s) < " + num(kRuntimeBudget) + " s");
      break;
    }
    case 2:
      suite_line(out, suite, "domination");
      suite_line(out, suite, "domination_trend");
      break;
    case 3:
      suite_line(out, suite, "duality");
      break;
    case 4:
      suite_line(out, suite, "certification");
      suite_line(out, suite, "exact_cross_check");
      break;
    case 5:
      suite_line(out, suite, "equivalents");
      suite_line(out, suite, "equivalents_trend");
      break;
    case 6:
      suite_line(out, suite, "iteration");
      suite_line(out, suite, "tail_zero");
      suite_line(out, suite, "vanishing");
      break;
    case 7:
      suite_line(out, suite, "holder");
      break;
    default:
      throw std::logic_error("not a suite criterion");
  }
  return out;
}

Outcome criterion8() {
  Outcome out;
  for (const SlopeWindow& w : slope_windows(kSuiteSeed, 1)) {
    std::string what = w.name + ": slope " + (w.fit_ok ? num(w.fit.slope) + " +- " + num(w.fit.std_err) : "n/a") +
                       " over " + std::to_string(w.fit.n) + " points, window [" + num(w.lo) + ", " + num(w.hi) + "]";
    if (w.errors) what += ", " + std::to_string(w.errors) + " estimator error(s)";
    out.add(w.pass(), what);
    if (w.name == "scalar_p2_probe")
      out.add(w.fit.n >= kMinProbePoints, "p = 2 probe uses " + std::to_string(w.fit.n) + " >= " +
                                              std::to_string(kMinProbePoints) + " points with ap_char in [1, 1e3]");
  }
  std::mt19937_64 rng(kSuiteSeed);
  std::lognormal_distribution<double> logn(0.0, 1.5);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = FilteredSpace::dyadic(2);
    std::vector<double> w(4);
    for (double& x : w) x = logn(rng);
    const double power = estimate_opnorm_p2(s, w, DiffConvention::kCentered, 1e-14).ratio;
    worst = std::max(worst, std::abs(power - dense_opnorm_p2(s, w)));
  }
  out.add(worst <= kDenseTol, "power iteration vs dense eigensolve at depth 2: max gap " + num(worst) + " <= " +
                                  num(kDenseTol));
  return out;
}

Outcome criterion9() {
  Outcome out;
  std::mt19937_64 rng(kSuiteSeed + 9);
  std::lognormal_distribution<double> logn(0.0, 1.5);
  std::normal_distribution<double> n01;
  double expect_err = 0, conj_err = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const RandomInstance inst = random_instance(kSuiteSeed + 9, trial, InstanceSpec{4, 8, {1}, {1.5, 2.0, 3.0, 4.0}});
    const FilteredSpace& s = *inst.space;
    const int leaves = s.num_leaves();
    std::vector<double> w(static_cast<size_t>(leaves));
    for (double& x : w) x = logn(rng);
    LeafFunction h = LeafFunction::zeros(1, leaves);
    for (int l = 0; l < leaves; ++l) h.values(0, l) = n01(rng);

    // E_n(w f) / E_n(w) against a direct loop over each atom's leaves.
    for (int n = 0; n <= s.depth(); ++n) {
      const LevelFunction got = weighted_cond_expect(s, w, h, n);
      for (int a = 0; a < s.num_atoms(n); ++a) {
        const Atom& at = s.atom(n, a);
        double num_ = 0, den = 0;
        for (int l = at.leaf_begin; l < at.leaf_end; ++l) {
          num_ += s.leaf_prob(l) * w[size_t(l)] * h.values(0, l);
          den += s.leaf_prob(l) * w[size_t(l)];
        }
        expect_err = std::max(expect_err, std::abs(got(0, a) - num_ / den) / (1 + std::abs(num_ / den)));
      }
    }

    // ||S_w(w^{1/p} h)||_{L_p} against ||S h||_{L_p^w}.
    const double p = inst.p;
    const WeightedSpace ws(inst.space, MatrixWeight::scalar(w), p);
    LeafFunction wh = h;
    for (int l = 0; l < leaves; ++l) wh.values(0, l) *= std::pow(w[size_t(l)], 1 / p);
    const double lhs = lp_norm(s, weighted_square_fn(ws, wh), p);
    const double rhs = lp_weighted_norm(ws, square_fn(s, martingale_of(s, h)));
    conj_err = std::max(conj_err, std::abs(lhs - rhs) / rhs);
  }
  out.add(expect_err <= kWeightedExpectTol,
          "weighted conditional expectation vs direct sums: max rel error " + num(expect_err) + " <= " +
              num(kWeightedExpectTol));
  out.add(conj_err <= kConjugationTol, "conjugation identity on 60 random (w, h): max rel error " + num(conj_err) +
                                           " <= " + num(kConjugationTol));
  return out;
}

Outcome criterion10(const fs::path& scratch) {
  Outcome out;
  const json cfg = {{"seed", 13},
                    {"sweep", {{"family", "rotating"}, {"d", 2}, {"p", 3.0}, {"depths", {4, 5}},
                               {"alphas", {0.5, 1.0, 1.5}}, {"restarts", 2}}}};
  const fs::path cfg_path = scratch / "sweep_config.json";
  io::write_file(cfg_path, cfg.dump());
  std::vector<std::string> csv;
  for (const auto& [tag, threads] : std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 1}, {"c", 2}}) {
    app::Overrides o;
    o.out = (scratch / tag).string();
    o.parallel = threads;
    const int rc = app::run(app::load_config("sweep", cfg_path.string(), o, {}));
    out.add(rc == app::kExitOk, "sweep run " + tag + " (" + std::to_string(threads) + " thread(s)) exit " +
                                    std::to_string(rc));
    csv.push_back(rc == app::kExitOk ? io::read_file(scratch / tag / "sweep.csv") : "");
  }
  out.add(!csv[0].empty() && csv[0] == csv[1], "repeated sweep: byte-identical CSV (" + std::to_string(csv[0].size()) +
                                                   " bytes)");
  out.add(!csv[0].empty() && csv[0] == csv[2], "1 vs 2 threads: byte-identical CSV");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"acceptance criteria"};
  std::vector<int> criteria;
  std::optional<std::string> cache;
  bool prepare = false;
  std::string scratch = (fs::temp_directory_path() / "wml_acceptance").string();
  cli.add_option("--criterion", criteria, "Criterion number(s); default all")->check(CLI::Range(1, 10));
  cli.add_option("--cache", cache, "Suite summary cache");
  cli.add_option("--scratch", scratch, "Scratch directory");
  cli.add_flag("--prepare", prepare, "Run the suite and write the cache");
  CLI11_PARSE(cli, argc, argv);

  try {
    if (prepare) {
      if (!cache) throw std::invalid_argument("--prepare needs --cache");
      const json j = run_suite_json();
      io::write_file(*cache, j.dump(1));
      std::cout << "suite cached: " << j["instances"] << " instances, " << num(j["seconds"]) << " s + "
                << num(j["certify_seconds"]) << " s certification\n";
      return 0;
    }
    if (criteria.empty())
      for (int i = 1; i <= 10; ++i) criteria.push_back(i);
    std::optional<json> suite;
    bool all = true;
    for (int n : criteria) {
      Outcome o;
      if (n <= 7) {
        if (!suite) suite = load_suite(cache);
        o = criterion_from_suite(n, *suite);
      } else if (n == 8) {
        o = criterion8();
      } else if (n == 9) {
        o = criterion9();
      } else {
        const fs::path dir = fs::path(scratch) / std::to_string(::getpid());
        fs::create_directories(dir);
        o = criterion10(dir);
        fs::remove_all(dir);
      }
      std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << '\n' << o.detail << std::flush;
      all = all && o.pass;
    }
    return all ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << '\n';
    return 2;
  }
}
