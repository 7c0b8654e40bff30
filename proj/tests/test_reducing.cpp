#include "common.hpp"

#include <doctest.h>

using namespace wt;

namespace {

NormSampler sampler(int d, std::function<double(const Vec&)> rho) {
  NormSampler s;
  s.dim = d;
  s.rho = std::move(rho);
  return s;
}

double scalar_ap(const FilteredSpace& s, const std::vector<double>& w, double p) {
  // sup over levels and atoms of (E w)(E w^{-1/(p-1)})^{p-1}, summed directly.
  double best = 0;
  for (int n = 0; n <= s.depth(); ++n)
    for (int a = 0; a < s.num_atoms(n); ++a) {
      const Atom& at = s.atom(n, a);
      double ew = 0, ev = 0;
      for (int l = at.leaf_begin; l < at.leaf_end; ++l) {
        ew += s.leaf_prob(l) * w[static_cast<size_t>(l)];
        ev += s.leaf_prob(l) * std::pow(w[static_cast<size_t>(l)], -1.0 / (p - 1));
      }
      ew /= at.prob;
      ev /= at.prob;
      best = std::max(best, ew * std::pow(ev, p - 1));
    }
  return best;
}

}  // namespace

TEST_CASE("reducing matrix of simple norms") {
  const double tol = 1e-3;
  auto euclid = norm_ball_reducing(sampler(3, [](const Vec& e) { return e.norm(); }), tol);
  CHECK((euclid.a - Mat::Identity(3, 3)).norm() < 1e-2);

  Mat d(2, 2);
  d << 3, 0, 0, 0.5;
  auto diag = norm_ball_reducing(sampler(2, [&](const Vec& e) { return (d * e).norm(); }), tol);
  CHECK((diag.a - d).norm() < 1e-2 * d.norm());

  auto square = norm_ball_reducing(sampler(2, [](const Vec& e) { return e.cwiseAbs().maxCoeff(); }), tol);
  CHECK((square.a - Mat::Identity(2, 2) / std::sqrt(2.0)).norm() < 1e-2);
  CHECK(square.held_out.upper <= 1 + tol);
  CHECK(square.held_out.lower >= 1 / ((1 + tol) * std::sqrt(2.0)));
}

TEST_CASE("John sandwich on random norms") {
  std::mt19937_64 rng(4);
  for (int d = 2; d <= 3; ++d) {
    std::vector<Mat> mats;
    for (int i = 0; i < 5; ++i) mats.push_back(random_spd(rng, d));
    auto rho = [&](const Vec& e) {
      double s = 0;
      for (const Mat& m : mats) s += std::pow((m * e).norm(), 3.0);
      return std::cbrt(s / 5);
    };
    const double tol = 5e-2;
    const ReducerResult r = norm_ball_reducing(sampler(d, rho), tol);
    const DirectionSet dirs = random_directions(d, 1000, 99);
    Eigen::VectorXd vals(dirs.size());
    for (int i = 0; i < dirs.size(); ++i) vals(i) = rho(dirs.dirs.col(i));
    const SandwichRatios sw = sandwich(r.a, dirs, vals);
    CHECK(sw.upper <= 1 + tol);
    CHECK(sw.lower >= 1 / ((1 + tol) * std::sqrt(double(d))));
  }
}

TEST_CASE("scalar reducers are exact") {
  const auto s = dyadic(3);
  std::mt19937_64 rng(6);
  const auto w = random_scalar_weight(rng, 8);
  for (double p : {1.5, 2.0, 3.0}) {
    const WeightedSpace ws(s, MatrixWeight::scalar(w), p);
    const ReducingPair pair = reduce_all(ws);
    for (int n = 0; n <= 3; ++n)
      for (int a = 0; a < s->num_atoms(n); ++a) {
        const Atom& at = s->atom(n, a);
        double ew = 0, ev = 0;
        for (int l = at.leaf_begin; l < at.leaf_end; ++l) {
          ew += s->leaf_prob(l) * w[size_t(l)];
          ev += s->leaf_prob(l) * std::pow(w[size_t(l)], -1 / (p - 1));
        }
        CHECK(pair.tilde(n, a)(0, 0) == doctest::Approx(std::pow(ew / at.prob, 1 / p)).epsilon(1e-13));
        CHECK(pair.hat(n, a)(0, 0) == doctest::Approx(std::pow(ev / at.prob, (p - 1) / p)).epsilon(1e-13));
      }
    const ReducingBoundsReport b = verify_reducing_bounds(ws, pair);
    CHECK(b.tilde_max <= 1 + 1e-10);
    CHECK(b.hat_max <= 1 + 1e-10);
    CHECK(ap_characteristic(pair) == doctest::Approx(scalar_ap(*s, w, p)).epsilon(1e-12));
  }
}

TEST_CASE("A_p characteristic examples") {
  const auto two = dyadic(1);
  const MatrixWeight w41 = MatrixWeight::scalar({4, 1});
  CHECK(ap_characteristic(WeightedSpace(two, MatrixWeight::scalar({1, 1}), 2)) == doctest::Approx(1.0));
  CHECK(ap_characteristic(WeightedSpace(two, w41, 2)) == doctest::Approx(25.0 / 16));
  CHECK(ap_characteristic(WeightedSpace(two, MatrixWeight::scalar({3, 3}), 3)) == doctest::Approx(1.0));

  const auto s = dyadic(3);
  CHECK(ap_characteristic(WeightedSpace(s, MatrixWeight::identity(2, 8), 2)) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(ap_characteristic(WeightedSpace(s, MatrixWeight::identity(3, 8), 3)) == doctest::Approx(1.0).epsilon(1e-2));

  std::mt19937_64 rng(8);
  const Mat c = random_spd(rng, 2);
  ReducerOptions exact;
  exact.exact_p2 = true;
  CHECK(ap_characteristic(WeightedSpace(s, MatrixWeight::constant(8, c), 2), exact) == doctest::Approx(1.0));
  const double v = ap_characteristic(WeightedSpace(s, MatrixWeight::constant(8, c), 3));
  CHECK(v >= 1 - 1e-9);
  CHECK(v <= std::pow(1.001, 6) * 8);

  // A_1: sup (E w) / w on a two-leaf space.
  CHECK(a1_characteristic(*two, w41) == doctest::Approx(2.5));
  CHECK(a1_characteristic(*s, MatrixWeight::scalar(std::vector<double>(8, 2.0))) == doctest::Approx(1.0));
  CHECK(a1_characteristic(*s, MatrixWeight::identity(2, 8)) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("scaling and rotation invariance") {
  std::mt19937_64 rng(9);
  const auto s = dyadic(4);
  const MatrixWeight w = random_weight(rng, 2, 16);
  for (double p : {1.5, 3.0}) {
    const double base = ap_characteristic(WeightedSpace(s, w, p));
    CHECK(ap_characteristic(WeightedSpace(s, w.scaled(7.5), p)) == doctest::Approx(base).epsilon(1e-10));
    // Global rotation: exact in theory, equal up to the reducer window in practice.
    const Mat q = Eigen::Rotation2Dd(0.7).toRotationMatrix();
    std::vector<Mat> rot;
    for (int l = 0; l < 16; ++l) rot.push_back(q * w.at(l) * q.transpose());
    const double r = ap_characteristic(WeightedSpace(s, MatrixWeight(2, rot), p));
    const double window = std::pow(1.001, 2 * std::max(p, conjugate_exponent(p)));
    CHECK(r <= base * window);
    CHECK(r >= base / window);
  }
}

TEST_CASE("dual weight under exchanged reducers") {
  const auto two = dyadic(1);
  const WeightedSpace w3(two, MatrixWeight::scalar({4, 1}), 3);
  const DualWeight dv = dual_weight(w3.weight(), 3);
  CHECK(dv.p_dual == doctest::Approx(1.5));
  CHECK(dv.v.at(0)(0, 0) == doctest::Approx(0.5));
  // [V]_{A_{3/2}} by closed form: (E v)(E v^{-2})^{1/2} with v = w^{-1/2}.
  const double closed = 0.75 * std::sqrt(2.5);
  CHECK(ap_characteristic(WeightedSpace(two, dv.v, 1.5)) == doctest::Approx(closed).epsilon(1e-13));
  CHECK(closed == doctest::Approx(std::sqrt(ap_characteristic(w3))).epsilon(1e-13));

  const WeightedSpace w2(two, MatrixWeight::scalar({4, 1}), 2);
  const ReducingPair pair = reduce_all(w2);
  CHECK(ap_characteristic(pair.exchanged()) == doctest::Approx(ap_characteristic(pair)).epsilon(1e-15));

  const DualWeight id = dual_weight(MatrixWeight::identity(3, 4), 4);
  for (int l = 0; l < 4; ++l) CHECK((id.v.at(l) - Mat::Identity(3, 3)).norm() < 1e-14);

  std::mt19937_64 rng(10);
  const auto s = dyadic(4);
  for (double p : {1.5, 3.0, 4.0}) {
    const WeightedSpace ws(s, random_weight(rng, 3, 16), p);
    const ReducingPair pr = reduce_all(ws);
    const double lhs = ap_characteristic(pr.exchanged());
    const double rhs = std::pow(ap_characteristic(pr), conjugate_exponent(p) - 1);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * rhs);
  }
}

TEST_CASE("equivalent characterizations") {
  const auto two = dyadic(1);
  const WeightedSpace flat(two, MatrixWeight::scalar({1, 1}), 2);
  const ApEquivalents e1 = ap_equivalents(flat, reduce_all(flat));
  CHECK(e1.q1 == doctest::Approx(1.0));
  CHECK(e1.q2 == doctest::Approx(1.0));

  const WeightedSpace w(two, MatrixWeight::scalar({4, 1}), 2);
  const ApEquivalents e = ap_equivalents(w, reduce_all(w));
  for (double q : {e.q1, e.q2}) {
    CHECK(q / (25.0 / 16) <= 4);
    CHECK(q / (25.0 / 16) >= 0.25);
  }
  CHECK(ap_equivalence_constant(2, 2) == doctest::Approx(32.0));
  CHECK(ap_equivalence_constant(1.5, 1) == doctest::Approx(16.0));

  std::mt19937_64 rng(12);
  for (int depth : {3, 5, 7}) {
    const auto s = dyadic(depth);
    const WeightedSpace ws(s, random_weight(rng, 2, s->num_leaves()), 3);
    const ReducingPair pair = reduce_all(ws);
    const double ap = ap_characteristic(pair);
    const ApEquivalents q = ap_equivalents(ws, pair);
    const double c = ap_equivalence_constant(3, 2);
    for (double v : {q.q1 / ap, q.q2 / ap}) {
      CHECK(v <= c);
      CHECK(v >= 1 / c);
    }
  }
}

TEST_CASE("reducing bounds and certification") {
  const auto s = dyadic(3);
  const WeightedSpace id(s, MatrixWeight::identity(2, 8), 2);
  const ReducingBoundsReport b = verify_reducing_bounds(id, reduce_all(id));
  CHECK(b.tilde_max == doctest::Approx(1.0).epsilon(3e-3));
  CHECK(b.hat_max == doctest::Approx(1.0).epsilon(3e-3));

  std::mt19937_64 rng(13);
  const WeightedSpace ws(s, random_weight(rng, 2, 8), 3);
  ReducerOptions opts;
  opts.tol = 5e-2;
  const ReducingPair pair = reduce_all(ws, opts);
  const ReducingBoundsReport rb = verify_reducing_bounds(ws, pair);
  CHECK(rb.tilde_max <= std::pow(2.0, 1.5) * 1.2);
  const CertificationReport cert = certify_reducers(ws, pair, 1000, 77);
  CHECK(cert.within(5e-2, 2));

  // p = 2: tilde against (E_n W)^{1/2}.
  const WeightedSpace w2(s, ws.weight(), 2);
  ReducerOptions ex = opts;
  ex.exact_p2 = true;
  const ReducingPair approx = reduce_all(w2, opts), exact = reduce_all(w2, ex);
  std::vector<std::vector<Mat>> a, e;
  for (int n = 0; n <= 3; ++n) {
    a.push_back(approx.tilde_level(n));
    e.push_back(exact.tilde_level(n));
  }
  const SandwichRatios r = compare_reducers(a, e, 1000, 5);
  CHECK(r.upper <= 1.05 * std::sqrt(2.0));
  CHECK(r.lower >= 1 / (1.05 * std::sqrt(2.0)));
}
