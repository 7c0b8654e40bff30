#pragma once

#include "wml/filtration.hpp"
#include "wml/matrix_weights.hpp"
#include "wml/principal_sets.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace wml {

struct RandomInstance {
  int index = 0;
  std::uint64_t seed = 0;
  double p = 2.0;
  std::shared_ptr<const FilteredSpace> space;
  MatrixWeight w = MatrixWeight::identity(1, 1);
  LeafFunction f;
};

struct InstanceSpec {
  int min_depth = 4;
  int max_depth = 12;
  std::vector<int> dims{1, 2, 3};
  std::vector<double> ps{1.5, 2.0, 3.0, 4.0};
  int leaf_cap = 4096;
};

/// Splitmix-style seed for instance `index` of a suite.
std::uint64_t instance_seed(std::uint64_t suite_seed, int index);

/// Seeded random instance: a dyadic tree with random splits or an irregular tree with
/// branching 1..3; W = Q diag(exp(sigma z)) Q^T per leaf; Gaussian f with some subtrees zeroed.
RandomInstance random_instance(std::uint64_t suite_seed, int index, const InstanceSpec& spec = {});

struct SuiteOptions {
  double cgamma = default_cgamma();
  double tol = 1e-10;           // property tolerance
  double reducer_tol = 5e-2;
  int certify_directions = 0;   // held-out directions per atom; 0 skips certification
  std::uint64_t certify_seed = 0xce57ULL;
  bool reducing_bounds = true;  // report-only averages of the reducer inverses
};

struct InstanceReport {
  int index = 0;
  int depth = 0;
  int d = 0;
  double p = 0;
  int leaves = 0;
  int generations = 0;
  int sets = 0;
  double ap = 0;

  PropertyReport props;
  bool halving = true;
  double halving_worst = 0;  // max above / below
  IterationReport iteration;
  VanishReport vanish;
  DominationReport domination;

  double dual_ap = 0;
  double dual_rel_err = 0;   // |[V]_{A_p'} - [W]_{A_p}^{p'-1}| / [W]_{A_p}^{p'-1}

  double q1_ratio = 0;       // q1 / [W]_{A_p}
  double q2_ratio = 0;
  double equiv_const = 0;

  bool holder = true;
  double holder_worst = 0;   // max T_2 / bound

  double tilde_bound_ratio = 0;  // tilde_max / tilde_bound, report-only
  double hat_bound_ratio = 0;

  std::optional<CertificationReport> certification;
  std::optional<SandwichRatios> exact_cross;  // p = 2 only

  double seconds = 0;          // everything up to certification
  double certify_seconds = 0;  // held-out certification and the p = 2 cross-check

  bool equivalents_ok() const;
  bool dual_ok(double rel) const { return dual_rel_err <= rel; }
};

InstanceReport check_instance(const RandomInstance& inst, const SuiteOptions& opts = {});

/// check_instance over instances 0..count-1 of a seeded suite, on `threads` workers.
/// Reports come back in instance order.
std::vector<InstanceReport> run_suite(std::uint64_t seed, int count, const InstanceSpec& spec, const SuiteOptions& opts,
                                      int threads = 1);

/// OLS slope of log(per-depth maximum of `value`) against depth.
double depth_trend(const std::vector<std::pair<int, double>>& depth_value);

struct CheckLine {
  std::string name;
  bool pass = true;
  bool gating = true;   // report-only lines never fail a run
  double measured = 0;
  double bound = 0;
  std::string detail;
};

struct SuiteSummary {
  int instances = 0;
  double seconds = 0;
  double certify_seconds = 0;
  std::vector<CheckLine> lines;
  bool pass() const;
  const CheckLine& line(const std::string& name) const;
};

inline constexpr double kTrendWindow = 0.05;
inline constexpr double kDualTol = 1e-8;

SuiteSummary summarize(const std::vector<InstanceReport>& reports, const SuiteOptions& opts);

}  // namespace wml
