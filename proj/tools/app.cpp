#include "app.hpp"

#include "wml/experiments.hpp"
#include "wml/io.hpp"
#include "wml/principal_sets.hpp"
#include "wml/suite.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

namespace wml::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 7;

template <class T>
std::optional<T> opt(const json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null()) return std::nullopt;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw UsageError("config: key '" + key + "' has the wrong type");
  }
}

// Section value, then top-level value, then fallback.
template <class T>
T pick(const RunConfig& cfg, const std::string& key, T fallback) {
  if (auto v = opt<T>(cfg.section(), key)) return *v;
  if (auto v = opt<T>(cfg.file, key)) return *v;
  return fallback;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(1) + "\n"); }

json meta(const RunConfig& cfg) {
  json m;
  m["command"] = cfg.command;
  m["seed"] = cfg.seed();
  m["config"] = cfg.file;
  return m;
}

std::string input_path(const RunConfig& cfg, const std::string& key) {
  if (!cfg.inputs.empty()) return cfg.inputs.front();
  if (auto v = opt<std::string>(cfg.section(), key)) return *v;
  throw UsageError(cfg.command + ": no input file given");
}

void print_line(const CheckLine& l) {
  const char* tag = l.pass ? "PASS" : (l.gating ? "FAIL" : "NOTE");
  std::cout << '[' << tag << "] " << l.name << " measured=" << fmt(l.measured) << " bound=" << fmt(l.bound) << "  "
            << l.detail << '\n';
}

json line_json(const CheckLine& l) {
  return {{"name", l.name}, {"pass", l.pass}, {"gating", l.gating}, {"measured", l.measured}, {"bound", l.bound},
          {"detail", l.detail}};
}

InstanceSpec instance_spec(const RunConfig& cfg) {
  InstanceSpec spec;
  spec.min_depth = pick(cfg, "min_depth", spec.min_depth);
  spec.max_depth = pick(cfg, "max_depth", spec.max_depth);
  spec.dims = pick(cfg, "dims", spec.dims);
  spec.ps = pick(cfg, "ps", spec.ps);
  if (cfg.flags.depth) spec.min_depth = spec.max_depth = *cfg.flags.depth;
  if (cfg.flags.d) spec.dims = {*cfg.flags.d};
  if (cfg.flags.p) spec.ps = {*cfg.flags.p};
  for (int d : spec.dims)
    if (d < 1 || d > kMaxDim) throw UsageError("check: d must be in [1, 6]");
  for (double p : spec.ps)
    if (!(p > 1.0)) throw UsageError("check: p must exceed 1");
  return spec;
}

SuiteOptions suite_options(const RunConfig& cfg) {
  SuiteOptions o;
  o.cgamma = cfg.flags.cgamma ? *cfg.flags.cgamma : pick(cfg, "cgamma", o.cgamma);
  o.tol = pick(cfg, "tol", o.tol);
  o.reducer_tol = pick(cfg, "reducer_tol", o.reducer_tol);
  o.certify_directions = pick(cfg, "certify_directions", o.certify_directions);
  o.reducing_bounds = pick(cfg, "reducing_bounds", o.reducing_bounds);
  if (!(o.cgamma >= 0.0)) throw UsageError("check: cgamma must be >= 0");
  if (!(o.reducer_tol > 0.0)) throw UsageError("check: reducer_tol must be positive");
  return o;
}

// Single instance from files; exports the family and reducers next to the report.
std::vector<InstanceReport> check_files(const RunConfig& cfg, const SuiteOptions& opts, const fs::path& out) {
  const auto space_path = opt<std::string>(cfg.section(), "space");
  const auto weight_path = opt<std::string>(cfg.section(), "weight");
  const auto function_path = opt<std::string>(cfg.section(), "function");
  if (!weight_path || !function_path) throw UsageError("check: space, weight and function files are all required");
  RandomInstance inst;
  inst.space = std::make_shared<const FilteredSpace>(FilteredSpace::from_tree(io::tree_from_json(io::read_file(*space_path))));
  inst.w = io::weight_from_csv(io::read_file(*weight_path));
  inst.f = io::function_from_csv(io::read_file(*function_path));
  inst.p = cfg.flags.p ? *cfg.flags.p : pick(cfg, "p", 2.0);
  if (!(inst.p > 1.0)) throw UsageError("check: p must exceed 1");
  if (inst.w.size() != inst.space->num_leaves() || inst.f.size() != inst.space->num_leaves())
    throw UsageError("check: weight and function must have one row per leaf");
  if (inst.f.dim() != inst.w.dim()) throw UsageError("check: function and weight dimensions differ");
  if (inst.w.clipped() > 0)
    std::cerr << "warning: " << inst.w.clipped() << " weight eigenvalue(s) clipped to 1e-10 of the leaf maximum\n";

  const WeightedSpace ws(inst.space, inst.w, inst.p);
  ReducerOptions ro;
  ro.tol = opts.reducer_tol;
  const ReducingPair pair = reduce_all(ws, ro);
  const PrincipalContext ctx(ws, pair, inst.f);
  io::write_file(out / "family.json", io::family_to_json(build_principal_family(ctx, opts.cgamma)));
  io::write_file(out / "reducers.json", io::reducers_to_json(pair));
  return {check_instance(inst, opts)};
}

}  // namespace

std::uint64_t RunConfig::seed() const {
  if (flags.seed) return *flags.seed;
  if (auto v = opt<std::uint64_t>(file, "seed")) return *v;
  if (const char* env = std::getenv("WML_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw UsageError("WML_SEED must be a non-negative integer");
    return v;
  }
  return kDefaultSeed;
}

fs::path RunConfig::out_dir() const {
  if (flags.out) return *flags.out;
  if (auto v = opt<std::string>(file, "out")) return *v;
  return ".";
}

int RunConfig::parallel() const {
  const int n = flags.parallel ? *flags.parallel : opt<int>(file, "parallel").value_or(1);
  if (n < 1) throw UsageError("parallel must be >= 1");
  return n;
}

json RunConfig::section() const {
  if (file.contains(command) && file[command].is_object()) return file[command];
  return json::object();
}

RunConfig load_config(const std::string& command, const std::optional<std::string>& path, Overrides flags,
                      std::vector<std::string> inputs) {
  RunConfig cfg;
  cfg.command = command;
  cfg.flags = std::move(flags);
  cfg.inputs = std::move(inputs);
  if (path) {
    try {
      cfg.file = json::parse(io::read_file(*path));
    } catch (const json::parse_error& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
    if (!cfg.file.is_object()) throw UsageError("config: top level must be an object");
  }
  return cfg;
}

int cmd_gen(const RunConfig& cfg) {
  const fs::path out = cfg.out_dir();
  const std::string kind = pick<std::string>(cfg, "kind", "dyadic");
  const int depth = cfg.flags.depth ? *cfg.flags.depth : pick(cfg, "depth", 4);
  json m = meta(cfg);
  m["kind"] = kind;
  if (kind == "dyadic") {
    const std::string probs = pick<std::string>(cfg, "probs", "uniform");
    std::optional<std::vector<double>> leaf_probs;
    if (probs == "random") {
      std::mt19937_64 rng(cfg.seed());
      std::uniform_real_distribution<double> u(0.1, 1.0);
      std::vector<double> q(size_t{1} << std::clamp(depth, 1, 24));
      double sum = 0.0;
      for (double& x : q) sum += (x = u(rng));
      for (double& x : q) x /= sum;
      leaf_probs = std::move(q);
    } else if (probs != "uniform") {
      throw UsageError("gen: probs must be uniform or random");
    }
    const FilteredSpace s = FilteredSpace::dyadic(depth, leaf_probs);
    io::write_file(out / "space.json", io::tree_to_json(s.to_tree()));
    m["leaves"] = s.num_leaves();
  } else if (kind == "random") {
    InstanceSpec spec;
    spec.min_depth = spec.max_depth = depth;
    if (cfg.flags.d) spec.dims = {*cfg.flags.d};
    else if (auto d = opt<int>(cfg.section(), "d")) spec.dims = {*d};
    if (cfg.flags.p) spec.ps = {*cfg.flags.p};
    const RandomInstance inst = random_instance(cfg.seed(), 0, spec);
    io::write_file(out / "space.json", io::tree_to_json(inst.space->to_tree()));
    io::write_file(out / "weight.csv", io::weight_to_csv(inst.w));
    io::write_file(out / "function.csv", io::function_to_csv(inst.f));
    m["leaves"] = inst.space->num_leaves();
    m["p"] = inst.p;
    m["d"] = inst.w.dim();
  } else if (kind == "power" || kind == "rotating") {
    const double alpha = pick(cfg, "alpha", 1.0);
    const double eps = pick(cfg, "eps", std::ldexp(1.0, -depth));
    if (kind == "power") {
      const ScalarInstance inst = gen_power_weight(depth, alpha, eps);
      io::write_file(out / "space.json", io::tree_to_json(inst.space->to_tree()));
      io::write_file(out / "weight.csv", io::weight_to_csv(MatrixWeight::scalar(inst.w)));
    } else {
      const int d = cfg.flags.d ? *cfg.flags.d : pick(cfg, "d", 2);
      const MatrixInstance inst = gen_rotating_matrix_weight(depth, d, alpha, eps, pick(cfg, "rotate", true));
      io::write_file(out / "space.json", io::tree_to_json(inst.space->to_tree()));
      io::write_file(out / "weight.csv", io::weight_to_csv(inst.w));
    }
    m["alpha"] = alpha;
    m["eps"] = eps;
  } else {
    throw UsageError("gen: unknown kind '" + kind + "'");
  }
  m["depth"] = depth;
  write_json(out / "gen_meta.json", m);
  std::cout << "wrote " << kind << " instance to " << out.string() << '\n';
  return kExitOk;
}

int cmd_check(const RunConfig& cfg) {
  const fs::path out = cfg.out_dir();
  const SuiteOptions opts = suite_options(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<InstanceReport> reports;
  if (cfg.section().contains("space")) {
    reports = check_files(cfg, opts, out);
  } else {
    const int count = pick(cfg, "instances", 1000);
    if (count < 1) throw UsageError("check: instances must be >= 1");
    reports = run_suite(cfg.seed(), count, instance_spec(cfg), opts, cfg.parallel());
  }
  SuiteSummary summary = summarize(reports, opts);
  if (reports.size() == 1) {
    // Depth trends need several depths.
    std::erase_if(summary.lines, [](const CheckLine& l) { return l.name.ends_with("_trend"); });
  }

  json report = meta(cfg);
  report["instances"] = summary.instances;
  report["cgamma"] = opts.cgamma;
  report["k_it"] = k_iteration(opts.cgamma);
  report["k_dom"] = k_domination(opts.cgamma);
  report["checks"] = json::array();
  for (const CheckLine& l : summary.lines) {
    print_line(l);
    report["checks"].push_back(line_json(l));
  }
  bool pass = summary.pass();
  if (cfg.flags.acceptance) {
    report["windows"] = json::array();
    for (const SlopeWindow& w : slope_windows(cfg.seed(), cfg.parallel())) {
      const CheckLine l{w.name, w.pass(), true, w.fit.slope, w.hi,
                        "slope of log ratio on log ap_char over " + std::to_string(w.fit.n) + " points, window [" +
                            fmt(w.lo) + ", " + fmt(w.hi) + "]"};
      print_line(l);
      report["windows"].push_back(line_json(l));
      pass = pass && l.pass;
    }
  }
  report["pass"] = pass;
  write_json(out / "check_report.json", report);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (pass ? "all checks passed" : "invariant failure") << " (" << summary.instances << " instance(s), "
            << fmt(secs) << " s)\n";
  return pass ? kExitOk : kExitInvariant;
}

int cmd_sweep(const RunConfig& cfg) {
  const fs::path out = cfg.out_dir();
  SweepConfig sc;
  sc.family = pick(cfg, "family", sc.family);
  sc.p = cfg.flags.p ? *cfg.flags.p : pick(cfg, "p", sc.p);
  sc.d = cfg.flags.d ? *cfg.flags.d : pick(cfg, "d", sc.d);
  sc.depths = pick(cfg, "depths", sc.depths);
  if (cfg.flags.depth) sc.depths = {*cfg.flags.depth};
  sc.alphas = pick(cfg, "alphas", sc.alphas);
  sc.eps = pick(cfg, "eps", sc.eps);
  sc.estimator = pick(cfg, "estimator", sc.estimator);
  sc.restarts = pick(cfg, "restarts", sc.restarts);
  sc.reducer_tol = pick(cfg, "reducer_tol", sc.reducer_tol);
  sc.seed = cfg.seed();
  sc.parallel = cfg.parallel();
  if (sc.depths.empty() || sc.alphas.empty()) throw UsageError("sweep: empty parameter grid");

  const SweepResult res = theorem_sweep(sc);
  io::write_file(out / "sweep.csv", sweep_csv(res.records));
  io::write_file(out / "sweep_timing.csv", timing_csv(res.records));
  json fit = json::parse(io::fit_to_json(res.fit));
  fit["fit_ok"] = res.fit_ok;
  fit["seed"] = sc.seed;
  write_json(out / "fit.json", fit);
  write_json(out / "sweep_meta.json", meta(cfg));
  int errors = 0;
  for (const SweepRecord& r : res.records) errors += r.status != "ok";
  std::cout << "sweep: " << res.records.size() << " point(s), " << errors << " estimator error(s)";
  if (res.fit_ok) std::cout << ", slope " << fmt(res.fit.slope) << " +- " << fmt(res.fit.std_err);
  std::cout << '\n';
  return kExitOk;
}

int cmd_fit(const RunConfig& cfg) {
  const fs::path out = cfg.out_dir();
  const auto records = parse_sweep_csv(io::read_file(input_path(cfg, "csv")));
  const FitResult fit = exponent_fit(fit_points(records));
  const std::string text = io::fit_to_json(fit);
  io::write_file(out / "fit.json", text);
  std::cout << text;
  return kExitOk;
}

int cmd_report(const RunConfig& cfg) {
  const fs::path out = cfg.out_dir();
  const auto records = parse_sweep_csv(io::read_file(input_path(cfg, "csv")));
  std::map<std::tuple<std::string, double, int>, std::vector<SweepRecord>> groups;
  for (const SweepRecord& r : records) groups[{r.family, r.p, r.d}].push_back(r);

  std::ostringstream text;
  std::string points = "family,p,d,log_ap_char,log_ratio\n";
  json rep = meta(cfg);
  rep["groups"] = json::array();
  for (const auto& [key, rows] : groups) {
    const auto& [family, p, d] = key;
    const bool scalar = d == 1;
    const double target = scalar ? scalar_target_exponent(p) : matrix_target_exponent(p);
    int errors = 0;
    for (const SweepRecord& r : rows) errors += r.status != "ok";
    const auto pts = fit_points(rows);
    for (const auto& [a, r] : pts) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s,%.17g,%d,%.17g,%.17g\n", family.c_str(), p, d, std::log(a), std::log(r));
      points += buf;
    }
    text << family << " family, p = " << fmt(p) << ", d = " << d << ": " << rows.size() << " point(s), " << errors
         << " estimator error(s)\n";
    text << "  " << (scalar ? "scalar" : "matrix") << " target exponent "
         << (scalar ? "max(1/2, 1/(p-1))" : "max(1/2 + 1/(p(p-1)), 1/(p-1))") << " = " << fmt(target) << '\n';
    json g{{"family", family}, {"p", p}, {"d", d}, {"points", rows.size()}, {"target_exponent", target}};
    try {
      const FitResult fit = exponent_fit(pts);
      text << "  fitted slope " << fmt(fit.slope) << " +- " << fmt(fit.std_err) << " (intercept " << fmt(fit.intercept)
           << "), slope - target = " << fmt(fit.slope - target) << '\n';
      g["slope"] = fit.slope;
      g["stderr"] = fit.std_err;
    } catch (const ValidationError& e) {
      text << "  no fit: " << e.what() << '\n';
    }
    double amin = HUGE_VAL, amax = 0.0;
    for (const auto& [a, r] : pts) {
      amin = std::min(amin, a);
      amax = std::max(amax, a);
    }
    if (!pts.empty()) text << "  ap_char range [" << fmt(amin) << ", " << fmt(amax) << "]\n";
    rep["groups"].push_back(g);
  }
  io::write_file(out / "report.txt", text.str());
  io::write_file(out / "report_points.csv", points);
  write_json(out / "report.json", rep);
  std::cout << text.str();
  return kExitOk;
}

int run(const RunConfig& cfg) {
  try {
    if (cfg.command == "gen") return cmd_gen(cfg);
    if (cfg.command == "check") return cmd_check(cfg);
    if (cfg.command == "sweep") return cmd_sweep(cfg);
    if (cfg.command == "fit") return cmd_fit(cfg);
    if (cfg.command == "report") return cmd_report(cfg);
    throw UsageError("unknown command '" + cfg.command + "'");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitInvariant;
  }
  return kExitUsage;
}

}  // namespace wml::app
