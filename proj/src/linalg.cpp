#include "wml/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wml {

namespace {

double off_diagonal_sq(const Mat& a) {
  double s = 0.0;
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < a.rows(); ++i)
      if (i != j) s += a(i, j) * a(i, j);
  return s;
}

}  // namespace

SymmetricEigen jacobi_eigen(const Mat& m) {
  const int n = static_cast<int>(m.rows());
  if (m.cols() != n) throw ValidationError("jacobi_eigen: matrix is not square");
  if (n > kMaxDim) throw ValidationError("jacobi_eigen: dimension exceeds kMaxDim");

  Mat a = 0.5 * (m + m.transpose());
  Mat v = Mat::Identity(n, n);
  const double scale = a.squaredNorm();
  if (scale == 0.0) return {Vec::Zero(n), v};

  for (int sweep = 0; sweep < 64; ++sweep) {
    if (off_diagonal_sq(a) <= 1e-32 * scale) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rutishauser's stable rotation.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{Vec(n), Mat(n, n)};
  for (int i = 0; i < n; ++i) {
    out.values(i) = a(order[i], order[i]);
    out.vectors.col(i) = v.col(order[i]);
  }
  return out;
}

bool is_symmetric(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

Mat spd_power(const Mat& m, double alpha) {
  if (!m.allFinite()) throw ValidationError("spd_power: non-finite entries");
  if (!is_symmetric(m)) throw ValidationError("spd_power: matrix is not symmetric");
  const SymmetricEigen eig = jacobi_eigen(m);
  if (!(eig.values.minCoeff() > 0.0)) throw ValidationError("spd_power: matrix is not positive definite");
  Vec powered(eig.values.size());
  for (int i = 0; i < eig.values.size(); ++i) powered(i) = std::pow(eig.values(i), alpha);
  Mat out = eig.vectors * powered.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  const Mat gram = m.transpose() * m;
  const SymmetricEigen eig = jacobi_eigen(gram);
  return std::sqrt(std::max(0.0, eig.values(eig.values.size() - 1)));
}

int clip_spectrum(Mat& m, double rel_floor) {
  const SymmetricEigen eig = jacobi_eigen(m);
  const double top = eig.values(eig.values.size() - 1);
  if (!(top > 0.0)) throw ValidationError("clip_spectrum: largest eigenvalue is not positive");
  const double floor = rel_floor * top;
  int clipped = 0;
  Vec vals = eig.values;
  for (int i = 0; i < vals.size(); ++i) {
    if (vals(i) < floor) {
      vals(i) = floor;
      ++clipped;
    }
  }
  if (clipped > 0) {
    m = eig.vectors * vals.asDiagonal() * eig.vectors.transpose();
    m = 0.5 * (m + m.transpose());
  }
  return clipped;
}

}  // namespace wml
