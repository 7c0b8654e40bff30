#include "wml/operators.hpp"

#include "wml/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace wml {

namespace {

void check_function(const FilteredSpace& space, const LeafFunction& f, int dim) {
  if (f.size() != space.num_leaves()) throw ValidationError("function size does not match leaf count");
  if (f.dim() != dim) throw ValidationError("function dimension does not match the weight");
}

LeafFunction scalar_leaves(int n) { return LeafFunction::zeros(1, n); }

}  // namespace

void validate_family(const FilteredSpace& space, const SparseFamily& family) {
  for (const SparseSet& s : family.sets) {
    if (s.kappa2 < 0 || s.kappa2 > space.depth()) throw ValidationError("family: kappa2 out of range");
    if (s.kappa1 >= s.kappa2) throw ValidationError("family: kappa1 must be below kappa2");
    for (int a : s.atoms)
      if (a < 0 || a >= space.num_atoms(s.kappa2)) throw ValidationError("family: atom index out of range");
  }
}

LeafFunction square_fn(const FilteredSpace& space, const Martingale& mart) {
  LeafFunction out = scalar_leaves(space.num_leaves());
  for (int l = 0; l < space.num_leaves(); ++l) {
    double s = 0.0;
    for (int k = 1; k <= space.depth(); ++k) s += mart.diff(k).col(space.atom_of(k, l)).squaredNorm();
    out.values(0, l) = std::sqrt(s);
  }
  return out;
}

LeafFunction weighted_square_fn(const WeightedSpace& ws, const LeafFunction& f, DiffConvention conv) {
  const FilteredSpace& space = ws.space();
  check_function(space, f, ws.dim());
  const Martingale mg(space, ws.apply_neg(f), conv);
  LeafFunction out = scalar_leaves(space.num_leaves());
  for (int l = 0; l < space.num_leaves(); ++l) {
    const Eigen::MatrixXd wp = ws.w_pos(l);
    double s = 0.0;
    for (int k = 1; k <= space.depth(); ++k) s += (wp * mg.diff(k).col(space.atom_of(k, l))).squaredNorm();
    out.values(0, l) = std::sqrt(s);
  }
  return out;
}

std::vector<std::vector<double>> hat_averages(const WeightedSpace& ws, const ReducingPair& pair, const LeafFunction& f) {
  const FilteredSpace& space = ws.space();
  check_function(space, f, ws.dim());
  const LeafFunction g = ws.apply_neg(f);
  std::vector<std::vector<double>> out(static_cast<size_t>(space.depth()) + 1);
  for (int n = 0; n <= space.depth(); ++n) {
    auto& lv = out[static_cast<size_t>(n)];
    lv.resize(static_cast<size_t>(space.num_atoms(n)));
    for (int a = 0; a < space.num_atoms(n); ++a) {
      const Atom& at = space.atom(n, a);
      const Eigen::MatrixXd hi = pair.hat_inv(n, a);
      double s = 0.0;
      for (int l = at.leaf_begin; l < at.leaf_end; ++l) s += space.leaf_prob(l) * (hi * g.at(l)).norm();
      lv[static_cast<size_t>(a)] = s / at.prob;
    }
  }
  return out;
}

LeafFunction mprime_maximal(const WeightedSpace& ws, const ReducingPair& pair, const LeafFunction& f) {
  const FilteredSpace& space = ws.space();
  const auto avg = hat_averages(ws, pair, f);
  LeafFunction out = scalar_leaves(space.num_leaves());
  for (int l = 0; l < space.num_leaves(); ++l) {
    double m = 0.0;
    for (int n = 0; n <= space.depth(); ++n) m = std::max(m, avg[static_cast<size_t>(n)][static_cast<size_t>(space.atom_of(n, l))]);
    out.values(0, l) = m;
  }
  return out;
}

LeafFunction sparse_op_matrix(const WeightedSpace& ws, const ReducingPair& pair, const SparseFamily& family, double r,
                              const LeafFunction& f) {
  const FilteredSpace& space = ws.space();
  if (!(r >= 1.0)) throw ValidationError("sparse_op_matrix: r must be >= 1");
  validate_family(space, family);
  LeafFunction out = scalar_leaves(space.num_leaves());
  if (family.sets.empty()) return out;
  const auto avg = hat_averages(ws, pair, f);
  for (const SparseSet& s : family.sets) {
    for (int a : s.atoms) {
      const Atom& at = space.atom(s.kappa2, a);
      const double e = avg[static_cast<size_t>(s.kappa2)][static_cast<size_t>(a)];
      if (e == 0.0) continue;
      const Mat& h = pair.hat(s.kappa2, a);
      for (int l = at.leaf_begin; l < at.leaf_end; ++l)
        out.values(0, l) += std::pow(spectral_norm(ws.w_pos(l) * h) * e, r);
    }
  }
  for (int l = 0; l < space.num_leaves(); ++l) out.values(0, l) = std::pow(out.values(0, l), 1.0 / r);
  return out;
}

LeafFunction sparse_op_scalar(const FilteredSpace& space, const std::vector<double>& w, double p,
                              const SparseFamily& family, double r, const LeafFunction& f) {
  if (static_cast<int>(w.size()) != space.num_leaves()) throw ValidationError("sparse_op_scalar: weight size mismatch");
  check_function(space, f, 1);
  if (!(p > 1.0)) throw ValidationError("sparse_op_scalar: p must exceed 1");
  if (!(r >= 1.0)) throw ValidationError("sparse_op_scalar: r must be >= 1");
  validate_family(space, family);
  LeafFunction g = scalar_leaves(space.num_leaves());
  for (int l = 0; l < space.num_leaves(); ++l) g.values(0, l) = std::abs(std::pow(w[static_cast<size_t>(l)], -1.0 / p) * f.values(0, l));
  LeafFunction out = scalar_leaves(space.num_leaves());
  for (const SparseSet& s : family.sets) {
    const LevelFunction e = cond_expect(space, g, s.kappa2);
    for (int a : s.atoms) {
      const Atom& at = space.atom(s.kappa2, a);
      for (int l = at.leaf_begin; l < at.leaf_end; ++l)
        out.values(0, l) += std::pow(w[static_cast<size_t>(l)], r / p) * std::pow(e(0, a), r);
    }
  }
  for (int l = 0; l < space.num_leaves(); ++l) out.values(0, l) = std::pow(out.values(0, l), 1.0 / r);
  return out;
}

LevelFunction weighted_cond_expect(const FilteredSpace& space, const std::vector<double>& w, const LeafFunction& f,
                                   int n) {
  if (static_cast<int>(w.size()) != space.num_leaves()) throw ValidationError("weighted_cond_expect: weight size mismatch");
  check_function(space, f, 1);
  LeafFunction wf = f;
  LeafFunction wl = scalar_leaves(space.num_leaves());
  for (int l = 0; l < space.num_leaves(); ++l) {
    if (!(w[static_cast<size_t>(l)] > 0.0)) throw ValidationError("weighted_cond_expect: weight must be positive");
    wf.values(0, l) *= w[static_cast<size_t>(l)];
    wl.values(0, l) = w[static_cast<size_t>(l)];
  }
  return cond_expect(space, wf, n).cwiseQuotient(cond_expect(space, wl, n));
}

double lp_weighted_norm(const WeightedSpace& ws, const LeafFunction& f) {
  return lp_norm(ws.space(), ws.apply_pos(f), ws.p());
}

LeafFunction doob_maximal(const FilteredSpace& space, const LeafFunction& f) {
  LeafFunction mag = scalar_leaves(space.num_leaves());
  for (int l = 0; l < space.num_leaves(); ++l) mag.values(0, l) = f.at(l).norm();
  LeafFunction out = scalar_leaves(space.num_leaves());
  for (int n = 0; n <= space.depth(); ++n) {
    const LevelFunction e = cond_expect(space, mag, n);
    for (int l = 0; l < space.num_leaves(); ++l) out.values(0, l) = std::max(out.values(0, l), e(0, space.atom_of(n, l)));
  }
  return out;
}

}  // namespace wml
