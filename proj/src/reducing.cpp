#include "wml/reducing.hpp"

#include "wml/linalg.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace wml {

namespace {

Eigen::MatrixXd normalize_columns(Eigen::MatrixXd m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j).normalize();
  return m;
}

// x_i' X^-1 x_i for every column of `pts`, X = sum_i u_i x_i x_i' over `support`.
struct Moment {
  Eigen::LLT<Mat> llt;
  bool ok = false;
};

Moment moment(const Eigen::MatrixXd& pts, const std::vector<int>& idx, const std::vector<double>& u) {
  const Eigen::Index d = pts.rows();
  Mat x = Mat::Zero(d, d);
  for (size_t i = 0; i < idx.size(); ++i) {
    if (u[i] > 0.0) {
      const Vec c = pts.col(idx[i]);
      x.noalias() += u[i] * c * c.transpose();
    }
  }
  Moment m;
  m.llt.compute(x);
  m.ok = m.llt.info() == Eigen::Success;
  return m;
}

double leverage(const Moment& m, const Eigen::MatrixXd& pts, int i) {
  const Vec x = pts.col(i);
  return m.llt.matrixL().solve(x).squaredNorm();
}

// Leverage of every sample at once.
void all_leverages(const Moment& m, const Eigen::MatrixXd& pts, std::vector<double>& out) {
  const int d = static_cast<int>(pts.rows());
  const Eigen::Index k = pts.cols();
  const Mat inv = m.llt.solve(Mat::Identity(d, d));
  out.resize(static_cast<size_t>(k));
  const double* x = pts.data();
  for (Eigen::Index j = 0; j < k; ++j, x += d) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) {
      double t = 0.5 * inv(a, a) * x[a];
      for (int b = a + 1; b < d; ++b) t += inv(a, b) * x[b];
      s += t * x[a];
    }
    out[static_cast<size_t>(j)] = 2.0 * s;
  }
}

}  // namespace

DirectionSet default_directions(int d, std::uint64_t seed) {
  if (d < 1 || d > kMaxDim) throw ValidationError("default_directions: dimension out of range");
  if (d == 1) return {Eigen::MatrixXd::Ones(1, 1)};
  if (d == 2) {
    constexpr int kHalf = 360;  // 720 angles, identified up to sign
    Eigen::MatrixXd dirs(2, kHalf);
    for (int k = 0; k < kHalf; ++k) {
      const double t = std::numbers::pi * k / kHalf;
      dirs(0, k) = std::cos(t);
      dirs(1, k) = std::sin(t);
    }
    return {dirs};
  }
  if (d == 3) {
    constexpr int kCount = 2048;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    Eigen::MatrixXd dirs(3, kCount);
    for (int i = 0; i < kCount; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / kCount;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * i;
      dirs(0, i) = r * std::cos(phi);
      dirs(1, i) = r * std::sin(phi);
      dirs(2, i) = z;
    }
    return {dirs};
  }
  return random_directions(d, 8192, seed);
}

DirectionSet random_directions(int d, int count, std::uint64_t seed) {
  if (d < 1 || count < 1) throw ValidationError("random_directions: bad size");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd dirs(d, count);
  for (int j = 0; j < count; ++j) {
    do {
      for (int i = 0; i < d; ++i) dirs(i, j) = gauss(rng);
    } while (dirs.col(j).norm() < 1e-12);
  }
  return {normalize_columns(std::move(dirs))};
}

LownerFit fit_lowner(const Eigen::MatrixXd& pts, double tol, int max_iter) {
  const int d = static_cast<int>(pts.rows());
  const int k = static_cast<int>(pts.cols());
  if (d < 1 || d > kMaxDim || k < 1) throw ValidationError("fit_lowner: bad point set");
  if (!pts.allFinite()) throw ValidationError("fit_lowner: non-finite sample");
  if (!(tol > 0.0)) throw ValidationError("fit_lowner: tol must be positive");

  if (d == 1) {
    const double r = pts.cwiseAbs().maxCoeff();
    if (!(r > 0.0)) throw ValidationError("fit_lowner: degenerate samples");
    Mat a(1, 1);
    a(0, 0) = 1.0 / r;
    return {a, 1.0, 0};
  }

  const double eps = (1.0 + tol) * (1.0 + tol) - 1.0;
  const double dd = d;

  // Seed the active set with the points of largest leverage under uniform weights.
  std::vector<int> all(static_cast<size_t>(k));
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> uniform(static_cast<size_t>(k), 1.0 / k);
  Moment m0;
  m0.llt.compute(Mat(pts * pts.transpose() / static_cast<double>(k)));
  m0.ok = m0.llt.info() == Eigen::Success;
  if (!m0.ok) throw ValidationError("fit_lowner: samples do not span the space");
  std::vector<double> omega;
  all_leverages(m0, pts, omega);
  const int seed_count = std::min(k, 4 * d + 4);
  std::vector<int> order = all;
  std::partial_sort(order.begin(), order.begin() + seed_count, order.end(),
                    [&](int a, int b) { return omega[static_cast<size_t>(a)] > omega[static_cast<size_t>(b)]; });
  std::vector<int> active(order.begin(), order.begin() + seed_count);
  std::vector<double> u(active.size(), 1.0 / static_cast<double>(active.size()));

  int iterations = 0;
  const double eps_inner = 0.5 * eps;
  while (true) {
    Moment m = moment(pts, active, u);
    if (!m.ok) {
      // The active set lost rank; fall back to uniform weights on every point.
      active = all;
      u = uniform;
      m = moment(pts, active, u);
    }
    // Wolfe-Atwood / Todd-Yildirim iterations on the active set.
    std::vector<double> w(active.size());
    while (true) {
      for (size_t i = 0; i < active.size(); ++i) w[i] = leverage(m, pts, active[i]);
      size_t jmax = 0;
      size_t jmin = active.size();
      for (size_t i = 0; i < active.size(); ++i) {
        if (w[i] > w[jmax]) jmax = i;
        if (u[i] > 0.0 && (jmin == active.size() || w[i] < w[jmin])) jmin = i;
      }
      const double up = w[jmax] / dd - 1.0;
      const double down = 1.0 - w[jmin] / dd;
      if (std::max(up, down) <= eps_inner) break;
      if (iterations >= max_iter) {
        const double ratio = std::sqrt(std::max(1.0, w[jmax] / dd));
        throw EllipsoidConvergenceError("fit_lowner: iteration cap reached", ratio,
                                        Mat(spd_power(Mat(m.llt.reconstructedMatrix()), -0.5) / std::sqrt(w[jmax])));
      }
      ++iterations;
      if (up >= down) {
        const double lam = (w[jmax] - dd) / (dd * (w[jmax] - 1.0));
        for (double& ui : u) ui *= 1.0 - lam;
        u[jmax] += lam;
      } else {
        const double floor = -u[jmin] / (1.0 - u[jmin]);
        double lam = floor;
        if (w[jmin] > 1.0) lam = std::max(floor, (w[jmin] - dd) / (dd * (w[jmin] - 1.0)));
        for (double& ui : u) ui *= 1.0 - lam;
        u[jmin] += lam;
        if (u[jmin] < 1e-300) u[jmin] = 0.0;
      }
      m = moment(pts, active, u);
      if (!m.ok) break;
    }
    if (!m.ok) continue;

    // Check every sample; grow the active set with the worst violators.
    all_leverages(m, pts, omega);
    const double worst = *std::max_element(omega.begin(), omega.end());
    if (worst <= dd * (1.0 + eps)) {
      Mat x = m.llt.reconstructedMatrix();
      Mat a = spd_power(x, -0.5) / std::sqrt(worst);
      return {a, std::sqrt(worst), iterations};
    }
    std::vector<char> in_active(static_cast<size_t>(k), 0);
    for (int i : active) in_active[static_cast<size_t>(i)] = 1;
    std::vector<int> cand;
    for (int i = 0; i < k; ++i)
      if (!in_active[static_cast<size_t>(i)] && omega[static_cast<size_t>(i)] > dd * (1.0 + eps_inner)) cand.push_back(i);
    const size_t add = std::min(cand.size(), static_cast<size_t>(2 * d));
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(add), cand.end(),
                      [&](int a, int b) { return omega[static_cast<size_t>(a)] > omega[static_cast<size_t>(b)]; });
    for (size_t i = 0; i < add; ++i) {
      active.push_back(cand[i]);
      u.push_back(0.0);
    }
    if (add == 0) {
      // Only active points violate, which the inner loop rules out; guard anyway.
      active = all;
      u = uniform;
    }
  }
}

LownerFit fit_reducer_from_samples(const DirectionSet& dirs, const Eigen::VectorXd& rho_values, double tol,
                                   int max_iter) {
  if (rho_values.size() != dirs.size()) throw ValidationError("fit_reducer_from_samples: size mismatch");
  Eigen::MatrixXd pts = dirs.dirs;
  for (int j = 0; j < dirs.size(); ++j) {
    if (!(rho_values(j) > 0.0) || !std::isfinite(rho_values(j)))
      throw ValidationError("fit_reducer_from_samples: rho must be positive and finite");
    pts.col(j) /= rho_values(j);
  }
  return fit_lowner(pts, tol, max_iter);
}

SandwichRatios sandwich(const Mat& a, const DirectionSet& dirs, const Eigen::VectorXd& rho_values) {
  SandwichRatios r{0.0, std::numeric_limits<double>::infinity()};
  const Eigen::MatrixXd img = Eigen::MatrixXd(a) * dirs.dirs;
  for (int j = 0; j < dirs.size(); ++j) {
    const double q = img.col(j).norm() / rho_values(j);
    r.upper = std::max(r.upper, q);
    r.lower = std::min(r.lower, q);
  }
  return r;
}

ReducerResult norm_ball_reducing(const NormSampler& sampler, double tol) {
  if (!sampler.rho) throw ValidationError("norm_ball_reducing: missing evaluator");
  const int d = sampler.dim;
  DirectionSet dirs = sampler.directions > 0 ? random_directions(d, sampler.directions, sampler.seed)
                                             : default_directions(d, sampler.seed);
  auto evaluate = [&](const DirectionSet& ds) {
    Eigen::VectorXd v(ds.size());
    for (int j = 0; j < ds.size(); ++j) v(j) = sampler.rho(Vec(ds.dirs.col(j)));
    return v;
  };
  Eigen::VectorXd vals = evaluate(dirs);
  const double lower_floor = 1.0 / ((1.0 + tol) * std::sqrt(static_cast<double>(d)));
  int total_iter = 0;
  constexpr int kRounds = 4;
  for (int round = 0; round < kRounds; ++round) {
    const LownerFit fit = fit_reducer_from_samples(dirs, vals, tol);
    total_iter += fit.iterations;
    const DirectionSet held = random_directions(d, 1000, sampler.seed ^ (0x9e3779b97f4a7c15ULL * (round + 1)));
    const Eigen::VectorXd held_vals = evaluate(held);
    const SandwichRatios r = sandwich(fit.a, held, held_vals);
    if (r.upper <= 1.0 + tol && r.lower >= lower_floor * (1.0 - 1e-12)) return {fit.a, r, total_iter};
    if (round + 1 == kRounds)
      throw EllipsoidConvergenceError("norm_ball_reducing: held-out sandwich not met", r.upper, fit.a);
    // Densify with the held-out directions and refit.
    Eigen::MatrixXd merged(d, dirs.size() + held.size());
    merged << dirs.dirs, held.dirs;
    Eigen::VectorXd merged_vals(vals.size() + held_vals.size());
    merged_vals << vals, held_vals;
    dirs.dirs = std::move(merged);
    vals = std::move(merged_vals);
  }
  throw EllipsoidConvergenceError("norm_ball_reducing: unreachable", 0.0, Mat());
}

}  // namespace wml
