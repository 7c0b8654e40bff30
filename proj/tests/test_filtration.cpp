#include "common.hpp"

#include <doctest.h>

using namespace wt;

TEST_CASE("dyadic construction") {
  const auto s = FilteredSpace::dyadic(2);
  CHECK(s.depth() == 2);
  CHECK(s.num_atoms(0) == 1);
  CHECK(s.num_atoms(1) == 2);
  CHECK(s.num_atoms(2) == 4);
  for (int l = 0; l < 4; ++l) CHECK(s.leaf_prob(l) == doctest::Approx(0.25).epsilon(1e-15));

  const auto t = FilteredSpace::dyadic(1, std::vector<double>{0.3, 0.7});
  CHECK(t.num_leaves() == 2);
  CHECK(t.leaf_prob(0) == doctest::Approx(0.3));
  CHECK(t.leaf_prob(1) == doctest::Approx(0.7));

  const auto big = FilteredSpace::dyadic(12);
  CHECK(big.num_leaves() == 4096);
  double sum = 0;
  for (int l = 0; l < big.num_leaves(); ++l) sum += big.leaf_prob(l);
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("tree construction") {
  TreeSpec root{1.0, {{0.5, {}}, {0.25, {}}, {0.25, {}}}};
  const auto s = FilteredSpace::from_tree(root);
  CHECK(s.depth() == 1);
  CHECK(s.num_leaves() == 3);

  // Second child stops splitting and persists.
  TreeSpec chain{1.0, {{0.5, {{0.25, {}}, {0.25, {}}}}, {0.5, {}}}};
  const auto c = FilteredSpace::from_tree(chain);
  CHECK(c.depth() == 2);
  CHECK(c.num_leaves() == 3);
  CHECK(c.atom(1, 1).prob == doctest::Approx(0.5));
  CHECK(c.atom(2, 2).prob == doctest::Approx(0.5));
  CHECK(c.atom(2, 2).parent == 1);

  CHECK_THROWS_AS(FilteredSpace::from_tree(TreeSpec{1.0, {{0.5, {}}, {0.6, {}}}}), ValidationError);
  CHECK_THROWS_AS(FilteredSpace::from_tree(TreeSpec{1.0, {{1.0, {}}, {0.0, {}}}}), ValidationError);
}

TEST_CASE("refinement invariant on a random tree") {
  std::mt19937_64 rng(11);
  std::shared_ptr<const FilteredSpace> s;
  do s = random_tree(rng, 7);
  while (s->num_leaves() < 200);
  for (int n = 0; n < s->depth(); ++n) {
    for (int a = 0; a < s->num_atoms(n); ++a) {
      const Atom& at = s->atom(n, a);
      CHECK(at.prob > 0);
      double sum = 0;
      for (int c = at.child_begin; c < at.child_end; ++c) {
        CHECK(s->atom(n + 1, c).parent == a);
        sum += s->atom(n + 1, c).prob;
      }
      CHECK(std::abs(sum - at.prob) < 1e-12);
    }
    for (int l = 0; l < s->num_leaves(); ++l)
      CHECK(s->atom(n + 1, s->atom_of(n + 1, l)).parent == s->atom_of(n, l));
  }
}

TEST_CASE("conditional expectation examples") {
  const auto s = FilteredSpace::dyadic(2);
  const LeafFunction f = LeafFunction::scalar({1, 0, 0, 0});
  const LevelFunction e1 = cond_expect(s, f, 1);
  CHECK(e1(0, 0) == doctest::Approx(0.5));
  CHECK(e1(0, 1) == doctest::Approx(0.0));
  CHECK(cond_expect(s, f, 2) == f.values);
  CHECK(cond_expect(s, f, 0)(0, 0) == doctest::Approx(0.25));

  const Martingale m = martingale_of(s, f);
  CHECK(m.diff(1)(0, 0) == doctest::Approx(0.25));
  CHECK(m.diff(1)(0, 1) == doctest::Approx(-0.25));
  CHECK(m.diff(2)(0, 0) == doctest::Approx(0.5));
  CHECK(m.diff(2)(0, 1) == doctest::Approx(-0.5));
  CHECK(m.diff(2)(0, 2) == doctest::Approx(0.0));

  const Martingale folded = martingale_of(s, f, DiffConvention::kFoldMean);
  CHECK(folded.diff(1)(0, 0) == doctest::Approx(0.5));

  const Martingale flat = martingale_of(s, LeafFunction::scalar({3, 3, 3, 3}));
  for (int k = 1; k <= 2; ++k) CHECK(flat.diff(k).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lp norm examples") {
  const auto s = FilteredSpace::dyadic(2);
  const LeafFunction f = LeafFunction::scalar({1, 0, 0, 0});
  CHECK(lp_norm(s, f, 2) == doctest::Approx(0.5));
  CHECK(lp_norm(s, f, 1) == doctest::Approx(0.25));
  CHECK(lp_norm(s, LeafFunction::scalar({-2, -2, -2, -2}), 3) == doctest::Approx(2.0));
  const auto t = FilteredSpace::dyadic(1, std::vector<double>{0.3, 0.7});
  CHECK(lp_norm(t, LeafFunction::scalar({1, 1}), 1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("tower, telescoping and contractivity on random instances") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const auto s = random_tree(rng, 5);
    const int d = 1 + trial % 3;
    const LeafFunction f = random_function(rng, d, s->num_leaves());
    const Martingale m = martingale_of(*s, f);
    for (int n = 0; n <= s->depth(); ++n) {
      const LeafFunction fn = lift(*s, cond_expect(*s, f, n), n);
      for (int k = 0; k <= s->depth(); ++k) {
        const LevelFunction lhs = cond_expect(*s, fn, k);
        const LevelFunction rhs = cond_expect(*s, f, std::min(n, k));
        const int lvl = std::min(n, k);
        CHECK((lift(*s, lhs, k).values - lift(*s, rhs, lvl).values).cwiseAbs().maxCoeff() < 1e-12);
      }
      // Telescoping f_0 + d_1 + ... + d_n = f_n.
      Eigen::MatrixXd acc = lift(*s, m.level(0), 0).values;
      for (int k = 1; k <= n; ++k) acc += lift(*s, m.diff(k), k).values;
      CHECK((acc - fn.values).cwiseAbs().maxCoeff() < 1e-12);
      // ||E_n h|| <= E_n ||h||.
      LeafFunction norms = LeafFunction::zeros(1, s->num_leaves());
      for (int l = 0; l < s->num_leaves(); ++l) norms.values(0, l) = f.at(l).norm();
      const LevelFunction en = cond_expect(*s, norms, n);
      const LevelFunction ef = cond_expect(*s, f, n);
      for (int a = 0; a < s->num_atoms(n); ++a) CHECK(ef.col(a).norm() <= en(0, a) + 1e-12);
      if (n < s->depth()) {
        const LevelFunction next = cond_expect(*s, f, n + 1);
        const LevelFunction back = cond_expect(*s, lift(*s, next, n + 1), n);
        CHECK((back - ef).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}
