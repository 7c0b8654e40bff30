#include "common.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

using namespace wt;

TEST_CASE("spd_power") {
  const Mat id = Mat::Identity(3, 3);
  CHECK((spd_power(id, 0.37) - id).norm() < 1e-14);
  Mat d(2, 2);
  d << 4, 0, 0, 9;
  Mat r(2, 2);
  r << 2, 0, 0, 3;
  CHECK((spd_power(d, 0.5) - r).norm() < 1e-12);

  std::mt19937_64 rng(1);
  for (int dim = 1; dim <= kMaxDim; ++dim) {
    const Mat m = random_spd(rng, dim);
    const Mat h = spd_power(m, 0.5);
    CHECK((h * h - m).norm() < 1e-10 * m.norm());
    CHECK((spd_power(m, -1.0) * m - Mat::Identity(dim, dim)).norm() < 1e-10);
  }
  Mat bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(spd_power(bad, 0.5), ValidationError);
  Mat asym(2, 2);
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(spd_power(asym, 0.5), ValidationError);
}

TEST_CASE("jacobi against Eigen") {
  std::mt19937_64 rng(2);
  for (int dim = 1; dim <= kMaxDim; ++dim) {
    const Mat m = random_spd(rng, dim, 2.0);
    const SymmetricEigen e = jacobi_eigen(m);
    const Eigen::MatrixXd dense = m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(dense);
    for (int i = 0; i < dim; ++i) CHECK(e.values(i) == doctest::Approx(ref.eigenvalues()(i)).epsilon(1e-12));
    CHECK((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - m).norm() < 1e-11 * m.norm());
  }
}

TEST_CASE("spectral norm") {
  Mat d(2, 2);
  d << 2, 0, 0, 5;
  CHECK(spectral_norm(d) == doctest::Approx(5.0));
  Vec u(3);
  u << 1, -2, 2;
  CHECK(spectral_norm(u * u.transpose()) == doctest::Approx(9.0));

  // 2x2 and 3x3 against the characteristic polynomial of M^T M.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    Mat a(2, 2);
    for (int i = 0; i < 4; ++i) a(i / 2, i % 2) = n01(rng);
    const Mat g = a.transpose() * a;
    const double tr = g.trace(), det = g.determinant();
    const double top = 0.5 * (tr + std::sqrt(std::max(0.0, tr * tr - 4 * det)));
    CHECK(spectral_norm(a) == doctest::Approx(std::sqrt(top)).epsilon(1e-12));

    Mat b(3, 3);
    for (int i = 0; i < 9; ++i) b(i / 3, i % 3) = n01(rng);
    const Mat h = b.transpose() * b;
    // Largest root of det(lambda I - H) by bisection.
    auto charp = [&](double x) { return (x * Mat::Identity(3, 3) - h).determinant(); };
    double lo = 0, hi = h.trace();
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (charp(mid) > 0 ? hi : lo) = mid;
    }
    CHECK(spectral_norm(b) == doctest::Approx(std::sqrt(hi)).epsilon(1e-10));
  }
}

TEST_CASE("spectrum clipping") {
  Mat m(2, 2);
  m << 1, 0, 0, 1e-14;
  CHECK(clip_spectrum(m) == 1);
  CHECK(m(1, 1) == doctest::Approx(1e-10));
  const MatrixWeight w(2, {m, Mat::Identity(2, 2)});
  CHECK(w.clipped() == 0);
  Mat tiny(2, 2);
  tiny << 1, 0, 0, 1e-13;
  const MatrixWeight c(2, {tiny});
  CHECK(c.clipped() == 1);
  CHECK_THROWS_AS(MatrixWeight(2, {tiny}, false), ValidationError);
}
