#pragma once

#include "wml/filtration.hpp"
#include "wml/matrix_weights.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace wml {

struct ScalarInstance {
  std::shared_ptr<const FilteredSpace> space;
  std::vector<double> w;
};

struct MatrixInstance {
  std::shared_ptr<const FilteredSpace> space;
  MatrixWeight w;
};

/// Dyadic space with w(leaf) = (x + eps)^alpha at leaf midpoints x, normalized to mean 1.
ScalarInstance gen_power_weight(int depth, double alpha, double eps);

/// W(leaf) = R(x) diag((x+eps)^alpha, (x+eps)^{-alpha/(d-1)}, ...) R(x)^T, det W = 1.
/// R is a leaf-indexed rotation (identity when `rotate` is false).
MatrixInstance gen_rotating_matrix_weight(int depth, int d, double alpha, double eps, bool rotate = true);

/// sup_f ||S f||_{L^2_w} / ||f||_{L^2_w} by power iteration; throws ConvergenceError
/// (carrying the last ratio) after `max_iter` steps.
struct PowerIterationResult {
  double ratio = 0;
  int iterations = 0;
  LeafFunction witness;  // f attaining the ratio
};

PowerIterationResult estimate_opnorm_p2(const FilteredSpace& space, const std::vector<double>& w,
                                        DiffConvention conv = DiffConvention::kCentered, double rel_tol = 1e-8,
                                        int max_iter = 10000);

/// Same quantity by dense eigendecomposition (reference for small spaces).
double dense_opnorm_p2(const FilteredSpace& space, const std::vector<double>& w,
                       DiffConvention conv = DiffConvention::kCentered);

struct OpnormEstimate {
  double ratio = 0;     // best ||S_W f||_p / ||f||_p found (a lower bound)
  LeafFunction witness;
  int iterations = 0;
  int restarts = 0;
  double fd_max_rel_error = 0;  // worst finite-difference mismatch of the ascent direction
};

/// Heuristic lower bound on the L_p operator norm of S_W via nonlinear power ascent.
OpnormEstimate estimate_opnorm_general(const WeightedSpace& ws, int restarts, std::uint64_t seed,
                                       DiffConvention conv = DiffConvention::kCentered, int max_iter = 300);

/// ||S_W f||_p / ||f||_p.
double opnorm_ratio(const WeightedSpace& ws, const LeafFunction& f, DiffConvention conv = DiffConvention::kCentered);

struct FitResult {
  double slope = 0;
  double intercept = 0;
  double std_err = 0;
  int n = 0;
};

/// Least squares of log(ratio) on log(ap).
FitResult exponent_fit(const std::vector<std::pair<double, double>>& points);

/// Exponent of [w]_{A_p} in the scalar square function bound: max(1/2, 1/(p-1)).
double scalar_target_exponent(double p);
/// Matrix-weighted counterpart: max(1/2 + 1/(p(p-1)), 1/(p-1)).
double matrix_target_exponent(double p);

struct SweepConfig {
  std::string family = "power";  // power | rotating
  double p = 2.0;
  int d = 1;
  std::vector<int> depths{6, 8, 10};
  std::vector<double> alphas{0.5, 1.0};
  std::vector<double> eps;  // empty: eps = 2^-depth
  std::string estimator = "auto";  // auto | p2 | general
  int restarts = 3;
  double reducer_tol = 1e-3;
  std::uint64_t seed = 7;
  int parallel = 1;
};

struct SweepRecord {
  int id = 0;
  std::string family;
  double p = 0;
  int d = 0;
  int depth = 0;
  double alpha = 0;
  double eps = 0;
  double ap_char = 0;
  double ratio = 0;
  int iterations = 0;
  int restarts = 0;
  std::string status = "ok";
  double seconds = 0;  // excluded from the CSV
};

struct SweepResult {
  std::vector<SweepRecord> records;
  FitResult fit;
  bool fit_ok = false;
};

SweepResult theorem_sweep(const SweepConfig& cfg);

/// A fitted slope against a window [lo, hi].
struct SlopeWindow {
  std::string name;
  std::string family;
  double p = 0;
  int d = 1;
  FitResult fit;
  bool fit_ok = false;
  double lo = 0;
  double hi = 0;
  int errors = 0;  // sweep points whose estimator failed
  bool pass() const { return fit_ok && fit.slope >= lo && fit.slope <= hi; }
};

/// Points with ap_char in [lo, hi] and status ok.
std::vector<std::pair<double, double>> fit_points(const std::vector<SweepRecord>& records, double lo = 0.0,
                                                  double hi = HUGE_VAL);

/// The designed slope probes: the p = 2 power family over depths 6..10 restricted to
/// [w]_{A_2} in [1, 1e3] against [0.75, 1.05], and upper consistency (slope <= target + 0.1)
/// for the power and rotating (d = 2) families at p in {1.5, 2, 3, 4}.
std::vector<SlopeWindow> slope_windows(std::uint64_t seed, int parallel = 1);

std::string sweep_csv(const std::vector<SweepRecord>& records);
std::string timing_csv(const std::vector<SweepRecord>& records);
std::vector<SweepRecord> parse_sweep_csv(const std::string& text);

}  // namespace wml
