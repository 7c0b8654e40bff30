#pragma once

#include "wml/core.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>

namespace wml {

/// Unit directions stored column-wise (d x K). Antipodal duplicates are omitted;
/// every norm and ellipsoid used here is symmetric.
struct DirectionSet {
  Eigen::MatrixXd dirs;
  int dim() const { return static_cast<int>(dirs.rows()); }
  int size() const { return static_cast<int>(dirs.cols()); }
};

/// Default boundary samples: d=1 a single direction, d=2 720 equispaced angles
/// (360 up to sign), d=3 2048 Fibonacci-sphere points, d>=4 8192 seeded uniform points.
DirectionSet default_directions(int d, std::uint64_t seed = 0x5eedULL);
/// Seeded uniform directions on the sphere.
DirectionSet random_directions(int d, int count, std::uint64_t seed);

/// Iteration cap hit while fitting an ellipsoid. Carries the last iterate; `last_value()`
/// is the achieved ratio sqrt(max_i x_i' X^-1 x_i / d).
class EllipsoidConvergenceError : public ConvergenceError {
 public:
  EllipsoidConvergenceError(const std::string& what, double ratio, Mat last)
      : ConvergenceError(what, ratio), last_(std::move(last)) {}
  const Mat& last_iterate() const noexcept { return last_; }

 private:
  Mat last_;
};

struct NormSampler {
  int dim = 1;
  std::function<double(const Vec&)> rho;
  int directions = 0;  // 0 selects the default count for `dim`
  std::uint64_t seed = 0x5eedULL;
};

struct LownerFit {
  Mat a;                     // {x : ||A x|| <= 1} encloses all samples
  double inner_factor = 1;   // rho(e) <= inner_factor * ||A e|| is guaranteed
  int iterations = 0;
};

/// Approximate minimum-volume centered ellipsoid enclosing {±x_i}. Returns A with
/// ||A x_i|| <= 1 for all i, and rho(e) <= sqrt(d (1 + eps)) ||A e|| where rho is the
/// gauge of conv{±x_i}, with (1 + eps) = (1 + tol)^2.
LownerFit fit_lowner(const Eigen::MatrixXd& points, double tol, int max_iter = 100000);

/// Values rho(u_i) along `dirs` to reducer; handles the sample scaling.
LownerFit fit_reducer_from_samples(const DirectionSet& dirs, const Eigen::VectorXd& rho_values, double tol,
                                   int max_iter = 100000);

struct SandwichRatios {
  double upper = 0;  // max ||A e|| / rho(e), contract <= 1 + tol
  double lower = 0;  // min ||A e|| / rho(e), contract >= 1 / ((1 + tol) sqrt d)
};

SandwichRatios sandwich(const Mat& a, const DirectionSet& dirs, const Eigen::VectorXd& rho_values);

struct ReducerResult {
  Mat a;
  SandwichRatios held_out;
  int iterations = 0;
};

/// Reducing matrix for the norm `rho`: the Löwner ellipsoid of its unit ball.
/// Throws ConvergenceError if the held-out sandwich fails after refinement.
ReducerResult norm_ball_reducing(const NormSampler& rho, double tol = 1e-3);

}  // namespace wml
