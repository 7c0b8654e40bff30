#include "wml/matrix_weights.hpp"

#include "wml/linalg.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <string>

namespace wml {

namespace {

// s^{q/2} for s = ||x||^2, with cheap paths for the exponents the suites use.
double pow_half(double s, double q) {
  if (q == 2.0) return s;
  if (q == 1.0) return std::sqrt(s);
  if (q == 4.0) return s * s;
  if (q == 3.0) return s * std::sqrt(s);
  if (q == 1.5) return std::sqrt(s) * std::sqrt(std::sqrt(s));
  return std::pow(s, 0.5 * q);
}

// x^{1/q} for the same exponents.
double root_q(double x, double q) {
  if (q == 2.0) return std::sqrt(x);
  if (q == 1.0) return x;
  if (q == 4.0) return std::sqrt(std::sqrt(x));
  if (q == 3.0) return std::cbrt(x);
  if (q == 1.5) {
    const double c = std::cbrt(x);
    return c * c;
  }
  return std::pow(x, 1.0 / q);
}

bool is_p2(double p) { return std::abs(p - 2.0) < 1e-15; }

void check_leaf_count(const FilteredSpace& space, int n) {
  if (space.num_leaves() != n) throw ValidationError("weight size does not match leaf count");
}

// Post-order walk that aggregates sampled values of E ||M u||^q per atom.
class SampleWalk {
 public:
  SampleWalk(const FilteredSpace& space, const std::vector<Mat>& mats, double q, const DirectionSet& dirs)
      : space_(space), mats_(mats), q_(q), dirs_(dirs) {}

  template <class OnAtom>
  void run(OnAtom&& on_atom) {
    visit(0, 0, on_atom);
  }

  Eigen::VectorXd rho_values(const Eigen::VectorXd& acc, double mass) const {
    Eigen::VectorXd r(acc.size());
    for (Eigen::Index j = 0; j < acc.size(); ++j) r(j) = root_q(acc(j) / mass, q_);
    return r;
  }

 private:
  template <class OnAtom>
  Eigen::VectorXd visit(int n, int a, OnAtom& on_atom) {
    const Atom& at = space_.atom(n, a);
    Eigen::VectorXd acc;
    if (n == space_.depth()) {
      const Eigen::MatrixXd img = Eigen::MatrixXd(mats_[static_cast<size_t>(a)]) * dirs_.dirs;
      acc.resize(img.cols());
      const double w = at.prob;
      for (Eigen::Index j = 0; j < img.cols(); ++j) acc(j) = w * pow_half(img.col(j).squaredNorm(), q_);
    } else {
      acc = visit(n + 1, at.child_begin, on_atom);
      for (int c = at.child_begin + 1; c < at.child_end; ++c) acc += visit(n + 1, c, on_atom);
    }
    on_atom(n, a, acc);
    return acc;
  }

  const FilteredSpace& space_;
  const std::vector<Mat>& mats_;
  double q_;
  const DirectionSet& dirs_;
};

std::vector<std::vector<Mat>> empty_levels(const FilteredSpace& space) {
  std::vector<std::vector<Mat>> out(static_cast<size_t>(space.depth()) + 1);
  for (int n = 0; n <= space.depth(); ++n) out[static_cast<size_t>(n)].resize(static_cast<size_t>(space.num_atoms(n)));
  return out;
}

// Uniform directions undersample the tips of an elongated ball. When the fit is badly
// conditioned, add the default directions pulled back through the fitted ellipsoid
// (uniform in its own coordinates) and refit.
constexpr double kRefineCond = 4.0;
constexpr int kRefinePasses = 2;

Mat refine_anisotropic(const FilteredSpace& space, const std::vector<Mat>& mats, double q, const Atom& at,
                       const DirectionSet& base, const Eigen::VectorXd& base_vals, Mat a, const ReducerOptions& opts) {
  DirectionSet dirs = base;
  Eigen::VectorXd vals = base_vals;
  for (int pass = 0; pass < kRefinePasses; ++pass) {
    const SymmetricEigen e = jacobi_eigen(a.transpose() * a);
    if (e.values(e.values.size() - 1) <= kRefineCond * kRefineCond * e.values(0)) break;
    Eigen::MatrixXd extra = a.inverse() * base.dirs;
    extra.colwise().normalize();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(extra.cols());
    for (int l = at.leaf_begin; l < at.leaf_end; ++l) {
      const Eigen::MatrixXd img = Eigen::MatrixXd(mats[static_cast<size_t>(l)]) * extra;
      const double w = space.leaf_prob(l);
      for (Eigen::Index j = 0; j < img.cols(); ++j) acc(j) += w * pow_half(img.col(j).squaredNorm(), q);
    }
    Eigen::VectorXd extra_vals(acc.size());
    for (Eigen::Index j = 0; j < acc.size(); ++j) extra_vals(j) = root_q(acc(j) / at.prob, q);
    Eigen::MatrixXd merged(dirs.dim(), dirs.size() + extra.cols());
    merged << dirs.dirs, extra;
    Eigen::VectorXd merged_vals(vals.size() + extra_vals.size());
    merged_vals << vals, extra_vals;
    dirs.dirs = std::move(merged);
    vals = std::move(merged_vals);
    a = fit_reducer_from_samples(dirs, vals, opts.tol, opts.max_iter).a;
  }
  return a;
}

std::vector<std::vector<Mat>> reduce_norms_masked(const FilteredSpace& space, const std::vector<Mat>& mats, double q,
                                                  const ReducerOptions& opts, const std::vector<char>& mask) {
  if (mats.empty()) throw ValidationError("reduce_norms: no leaf matrices");
  const int d = static_cast<int>(mats.front().rows());
  const DirectionSet dirs = default_directions(d, opts.seed);
  auto out = empty_levels(space);
  SampleWalk walk(space, mats, q, dirs);
  walk.run([&](int n, int a, const Eigen::VectorXd& acc) {
    if (!mask[static_cast<size_t>(n)]) return;
    const Atom& at = space.atom(n, a);
    Mat& slot = out[static_cast<size_t>(n)][static_cast<size_t>(a)];
    if (at.leaf_count() == 1) {
      slot = mats[static_cast<size_t>(at.leaf_begin)];  // rho is exactly ||M e||
    } else if (at.child_end - at.child_begin == 1 && mask[static_cast<size_t>(n) + 1]) {
      slot = out[static_cast<size_t>(n) + 1][static_cast<size_t>(at.child_begin)];
    } else {
      slot = fit_reducer_from_samples(dirs, walk.rho_values(acc, at.prob), opts.tol, opts.max_iter).a;
      if (d > 1) slot = refine_anisotropic(space, mats, q, at, dirs, walk.rho_values(acc, at.prob), slot, opts);
    }
  });
  return out;
}

// Exact scalar reducers: (E_n w)^{1/p} and (E_n w^{-p'/p})^{1/p'}.
LevelReducers scalar_level(const WeightedSpace& ws, int n) {
  const FilteredSpace& space = ws.space();
  const double p = ws.p();
  const double pc = ws.p_conj();
  LeafFunction w = LeafFunction::zeros(1, space.num_leaves());
  LeafFunction v = LeafFunction::zeros(1, space.num_leaves());
  for (int l = 0; l < space.num_leaves(); ++l) {
    w.values(0, l) = ws.weight().at(l)(0, 0);
    v.values(0, l) = std::pow(ws.weight().at(l)(0, 0), -pc / p);
  }
  const LevelFunction ew = cond_expect(space, w, n);
  const LevelFunction ev = cond_expect(space, v, n);
  LevelReducers out;
  for (Eigen::Index a = 0; a < ew.cols(); ++a) {
    Mat t(1, 1), h(1, 1);
    t(0, 0) = std::pow(ew(0, a), 1.0 / p);
    h(0, 0) = std::pow(ev(0, a), 1.0 / pc);
    out.tilde.push_back(t);
    out.hat.push_back(h);
  }
  return out;
}

LevelReducers exact_p2_level(const WeightedSpace& ws, int n) {
  const FilteredSpace& space = ws.space();
  LevelReducers out;
  for (const Atom& at : space.level(n)) {
    Mat sw = Mat::Zero(ws.dim(), ws.dim());
    Mat sv = Mat::Zero(ws.dim(), ws.dim());
    for (int l = at.leaf_begin; l < at.leaf_end; ++l) {
      sw += space.leaf_prob(l) * ws.weight().at(l);
      sv += space.leaf_prob(l) * (ws.w_neg(l) * ws.w_neg(l));
    }
    out.tilde.push_back(spd_power(Mat(0.5 * (sw + sw.transpose()) / at.prob), 0.5));
    out.hat.push_back(spd_power(Mat(0.5 * (sv + sv.transpose()) / at.prob), 0.5));
  }
  return out;
}

}  // namespace

MatrixWeight::MatrixWeight(int dim, std::vector<Mat> leaves, bool clip) : dim_(dim), leaves_(std::move(leaves)) {
  if (dim < 1 || dim > kMaxDim) throw ValidationError("MatrixWeight: dimension must be in [1, 6]");
  if (leaves_.empty()) throw ValidationError("MatrixWeight: no leaves");
  for (size_t i = 0; i < leaves_.size(); ++i) {
    Mat& m = leaves_[i];
    const std::string where = " at leaf " + std::to_string(i);
    if (m.rows() != dim || m.cols() != dim) throw ValidationError("MatrixWeight: wrong matrix shape" + where);
    if (!m.allFinite()) throw ValidationError("MatrixWeight: non-finite entry" + where);
    if (!is_symmetric(m)) throw ValidationError("MatrixWeight: matrix not symmetric" + where);
    m = 0.5 * (m + m.transpose());
    if (dim == 1) {
      if (!(m(0, 0) > 0.0)) throw ValidationError("MatrixWeight: non-positive scalar weight" + where);
      continue;
    }
    const SymmetricEigen eig = jacobi_eigen(m);
    const double top = eig.values(dim - 1);
    if (!(top > 0.0)) throw ValidationError("MatrixWeight: matrix not positive definite" + where);
    if (eig.values(0) < 1e-10 * top) {
      if (!clip) throw ValidationError("MatrixWeight: matrix not positive definite" + where);
      clipped_ += clip_spectrum(m, 1e-10);
    }
  }
}

MatrixWeight MatrixWeight::scalar(const std::vector<double>& w) {
  std::vector<Mat> leaves;
  leaves.reserve(w.size());
  for (double x : w) {
    Mat m(1, 1);
    m(0, 0) = x;
    leaves.push_back(m);
  }
  return MatrixWeight(1, std::move(leaves));
}

MatrixWeight MatrixWeight::constant(int leaves, const Mat& m) {
  return MatrixWeight(static_cast<int>(m.rows()), std::vector<Mat>(static_cast<size_t>(leaves), m));
}

MatrixWeight MatrixWeight::scaled(double c) const {
  if (!(c > 0.0)) throw ValidationError("MatrixWeight::scaled: factor must be positive");
  std::vector<Mat> out(leaves_);
  for (Mat& m : out) m *= c;
  return MatrixWeight(dim_, std::move(out), false);
}

MatrixWeight MatrixWeight::power(double alpha) const {
  std::vector<Mat> out;
  out.reserve(leaves_.size());
  for (const Mat& m : leaves_) {
    if (dim_ == 1) {
      Mat s(1, 1);
      s(0, 0) = std::pow(m(0, 0), alpha);
      out.push_back(s);
    } else {
      out.push_back(spd_power(m, alpha));
    }
  }
  return MatrixWeight(dim_, std::move(out), false);
}

WeightedSpace::WeightedSpace(std::shared_ptr<const FilteredSpace> space, MatrixWeight w, double p)
    : space_(std::move(space)), w_(std::move(w)), p_(p) {
  if (!space_) throw ValidationError("WeightedSpace: null space");
  if (!(p > 1.0) || !std::isfinite(p)) throw ValidationError("WeightedSpace: p must lie in (1, inf)");
  check_leaf_count(*space_, w_.size());
  pos_.reserve(static_cast<size_t>(w_.size()));
  neg_.reserve(static_cast<size_t>(w_.size()));
  for (int l = 0; l < w_.size(); ++l) {
    if (w_.dim() == 1) {
      Mat a(1, 1), b(1, 1);
      a(0, 0) = std::pow(w_.at(l)(0, 0), 1.0 / p);
      b(0, 0) = std::pow(w_.at(l)(0, 0), -1.0 / p);
      pos_.push_back(a);
      neg_.push_back(b);
    } else {
      pos_.push_back(spd_power(w_.at(l), 1.0 / p));
      neg_.push_back(spd_power(w_.at(l), -1.0 / p));
    }
  }
}

LeafFunction WeightedSpace::apply_pos(const LeafFunction& f) const {
  if (f.size() != w_.size() || f.dim() != dim()) throw ValidationError("apply_pos: shape mismatch");
  LeafFunction out = f;
  for (int l = 0; l < f.size(); ++l) out.at(l) = Eigen::MatrixXd(pos_[static_cast<size_t>(l)]) * f.at(l);
  return out;
}

LeafFunction WeightedSpace::apply_neg(const LeafFunction& f) const {
  if (f.size() != w_.size() || f.dim() != dim()) throw ValidationError("apply_neg: shape mismatch");
  LeafFunction out = f;
  for (int l = 0; l < f.size(); ++l) out.at(l) = Eigen::MatrixXd(neg_[static_cast<size_t>(l)]) * f.at(l);
  return out;
}

ReducingPair::ReducingPair(double p, double tol, std::vector<std::vector<Mat>> tilde,
                           std::vector<std::vector<Mat>> hat)
    : p_(p), tol_(tol), tilde_(std::move(tilde)), hat_(std::move(hat)) {
  if (tilde_.size() != hat_.size()) throw ValidationError("ReducingPair: level count mismatch");
  hat_inv_.resize(hat_.size());
  for (size_t n = 0; n < hat_.size(); ++n) {
    if (tilde_[n].size() != hat_[n].size()) throw ValidationError("ReducingPair: atom count mismatch");
    hat_inv_[n].reserve(hat_[n].size());
    for (const Mat& h : hat_[n]) hat_inv_[n].push_back(spd_power(h, -1.0));
  }
}

ReducingPair ReducingPair::exchanged() const {
  return ReducingPair(conjugate_exponent(p_), tol_, hat_, tilde_);
}

std::vector<std::vector<Mat>> reduce_norms(const FilteredSpace& space, const std::vector<Mat>& leaf_mats, double q,
                                           const ReducerOptions& opts) {
  check_leaf_count(space, static_cast<int>(leaf_mats.size()));
  if (!(q >= 1.0)) throw ValidationError("reduce_norms: q must be >= 1");
  return reduce_norms_masked(space, leaf_mats, q, opts, std::vector<char>(static_cast<size_t>(space.depth()) + 1, 1));
}

namespace {

std::vector<Mat> pos_mats(const WeightedSpace& ws) {
  std::vector<Mat> out;
  for (int l = 0; l < ws.space().num_leaves(); ++l) out.push_back(ws.w_pos(l));
  return out;
}

std::vector<Mat> neg_mats(const WeightedSpace& ws) {
  std::vector<Mat> out;
  for (int l = 0; l < ws.space().num_leaves(); ++l) out.push_back(ws.w_neg(l));
  return out;
}

void check_exact(const WeightedSpace& ws, const ReducerOptions& opts) {
  if (opts.exact_p2 && !is_p2(ws.p())) throw ValidationError("exact_p2 reducers require p = 2");
}

}  // namespace

LevelReducers reduce_pair(const WeightedSpace& ws, int n, const ReducerOptions& opts) {
  const FilteredSpace& space = ws.space();
  if (n < 0 || n > space.depth()) throw ValidationError("reduce_pair: level out of range");
  check_exact(ws, opts);
  if (ws.dim() == 1) return scalar_level(ws, n);
  if (opts.exact_p2) return exact_p2_level(ws, n);
  std::vector<char> mask(static_cast<size_t>(space.depth()) + 1, 0);
  mask[static_cast<size_t>(n)] = 1;
  LevelReducers out;
  out.tilde = std::move(reduce_norms_masked(space, pos_mats(ws), ws.p(), opts, mask)[static_cast<size_t>(n)]);
  out.hat = std::move(reduce_norms_masked(space, neg_mats(ws), ws.p_conj(), opts, mask)[static_cast<size_t>(n)]);
  return out;
}

ReducingPair reduce_all(const WeightedSpace& ws, const ReducerOptions& opts) {
  const FilteredSpace& space = ws.space();
  check_exact(ws, opts);
  std::vector<std::vector<Mat>> tilde, hat;
  if (ws.dim() == 1 || opts.exact_p2) {
    for (int n = 0; n <= space.depth(); ++n) {
      LevelReducers lv = ws.dim() == 1 ? scalar_level(ws, n) : exact_p2_level(ws, n);
      tilde.push_back(std::move(lv.tilde));
      hat.push_back(std::move(lv.hat));
    }
  } else {
    tilde = reduce_norms(space, pos_mats(ws), ws.p(), opts);
    hat = reduce_norms(space, neg_mats(ws), ws.p_conj(), opts);
  }
  return ReducingPair(ws.p(), (ws.dim() == 1 || opts.exact_p2) ? 0.0 : opts.tol, std::move(tilde), std::move(hat));
}

ReducingBoundsReport verify_reducing_bounds(const WeightedSpace& ws, const ReducingPair& pair) {
  const FilteredSpace& space = ws.space();
  const double p = ws.p();
  const double pc = ws.p_conj();
  const double d = ws.dim();
  ReducingBoundsReport r;
  r.tilde_bound = std::pow(d, p / 2.0) * std::pow(1.0 + pair.tol(), p);
  r.hat_bound = std::pow(d, pc / 2.0) * std::pow(1.0 + pair.tol(), pc);
  for (int n = 0; n <= space.depth(); ++n) {
    std::vector<double> tv, hv;
    for (int a = 0; a < space.num_atoms(n); ++a) {
      const Atom& at = space.atom(n, a);
      const Mat ti = spd_power(pair.tilde(n, a), -1.0);
      double st = 0.0, sh = 0.0;
      for (int l = at.leaf_begin; l < at.leaf_end; ++l) {
        st += space.leaf_prob(l) * std::pow(spectral_norm(ws.w_pos(l) * ti), p);
        sh += space.leaf_prob(l) * std::pow(spectral_norm(ws.w_neg(l) * pair.hat_inv(n, a)), pc);
      }
      tv.push_back(st / at.prob);
      hv.push_back(sh / at.prob);
      r.tilde_max = std::max(r.tilde_max, tv.back());
      r.hat_max = std::max(r.hat_max, hv.back());
    }
    r.tilde_by_atom.push_back(std::move(tv));
    r.hat_by_atom.push_back(std::move(hv));
  }
  return r;
}

bool CertificationReport::within(double tol, int d) const {
  return upper_max <= 1.0 + tol && lower_min >= 1.0 / ((1.0 + tol) * std::sqrt(static_cast<double>(d)));
}

CertificationReport certify_reducers(const WeightedSpace& ws, const ReducingPair& pair, int count,
                                     std::uint64_t seed) {
  const FilteredSpace& space = ws.space();
  const DirectionSet held = random_directions(ws.dim(), count, seed);
  CertificationReport r;
  auto check_side = [&](const std::vector<Mat>& mats, double q, bool tilde_side) {
    SampleWalk walk(space, mats, q, held);
    walk.run([&](int n, int a, const Eigen::VectorXd& acc) {
      const Mat& red = tilde_side ? pair.tilde(n, a) : pair.hat(n, a);
      const SandwichRatios s = sandwich(red, held, walk.rho_values(acc, space.atom(n, a).prob));
      r.upper_max = std::max(r.upper_max, s.upper);
      r.lower_min = std::min(r.lower_min, s.lower);
      ++r.atoms_checked;
    });
  };
  check_side(pos_mats(ws), ws.p(), true);
  check_side(neg_mats(ws), ws.p_conj(), false);
  return r;
}

SandwichRatios compare_reducers(const std::vector<std::vector<Mat>>& a, const std::vector<std::vector<Mat>>& b,
                                int count, std::uint64_t seed) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("compare_reducers: shape mismatch");
  const int d = static_cast<int>(a.front().front().rows());
  const DirectionSet dirs = random_directions(d, count, seed);
  SandwichRatios r{0.0, std::numeric_limits<double>::infinity()};
  for (size_t n = 0; n < a.size(); ++n) {
    if (a[n].size() != b[n].size()) throw ValidationError("compare_reducers: shape mismatch");
    for (size_t i = 0; i < a[n].size(); ++i) {
      const Eigen::MatrixXd ia = Eigen::MatrixXd(a[n][i]) * dirs.dirs;
      const Eigen::MatrixXd ib = Eigen::MatrixXd(b[n][i]) * dirs.dirs;
      for (int j = 0; j < dirs.size(); ++j) {
        const double q = ia.col(j).norm() / ib.col(j).norm();
        r.upper = std::max(r.upper, q);
        r.lower = std::min(r.lower, q);
      }
    }
  }
  return r;
}

double ap_characteristic(const ReducingPair& pair) {
  double best = 0.0;
  for (int n = 0; n <= pair.depth(); ++n)
    for (size_t a = 0; a < pair.tilde_level(n).size(); ++a)
      best = std::max(best, spectral_norm(pair.tilde(n, static_cast<int>(a)) * pair.hat(n, static_cast<int>(a))));
  return std::pow(best, pair.p());
}

double ap_characteristic(const WeightedSpace& ws, const ReducerOptions& opts) {
  return ap_characteristic(reduce_all(ws, opts));
}

double a1_characteristic(const FilteredSpace& space, const MatrixWeight& w, const ReducerOptions& opts) {
  check_leaf_count(space, w.size());
  std::vector<std::vector<Mat>> tilde;
  if (w.dim() == 1) {
    LeafFunction f = LeafFunction::zeros(1, space.num_leaves());
    for (int l = 0; l < space.num_leaves(); ++l) f.values(0, l) = w.at(l)(0, 0);
    for (int n = 0; n <= space.depth(); ++n) {
      const LevelFunction e = cond_expect(space, f, n);
      std::vector<Mat> lv;
      for (Eigen::Index a = 0; a < e.cols(); ++a) {
        Mat t(1, 1);
        t(0, 0) = e(0, a);
        lv.push_back(t);
      }
      tilde.push_back(std::move(lv));
    }
  } else {
    std::vector<Mat> mats;
    for (int l = 0; l < w.size(); ++l) mats.push_back(w.at(l));
    tilde = reduce_norms(space, mats, 1.0, opts);
  }
  std::vector<Mat> inv;
  for (int l = 0; l < w.size(); ++l) inv.push_back(w.dim() == 1 ? Mat(w.at(l).cwiseInverse()) : spd_power(w.at(l), -1.0));
  double best = 0.0;
  for (int n = 0; n <= space.depth(); ++n)
    for (int l = 0; l < space.num_leaves(); ++l)
      best = std::max(best, spectral_norm(tilde[static_cast<size_t>(n)][static_cast<size_t>(space.atom_of(n, l))] *
                                          inv[static_cast<size_t>(l)]));
  return best;
}

DualWeight dual_weight(const MatrixWeight& w, double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ValidationError("dual_weight: p must lie in (1, inf)");
  const double pc = conjugate_exponent(p);
  return {w.power(-pc / p), pc};
}

ApEquivalents ap_equivalents(const WeightedSpace& ws, const ReducingPair& pair) {
  const FilteredSpace& space = ws.space();
  const double p = ws.p();
  const double pc = ws.p_conj();
  double s1 = 0.0, s2 = 0.0;
  for (int n = 0; n <= space.depth(); ++n) {
    for (int a = 0; a < space.num_atoms(n); ++a) {
      const Atom& at = space.atom(n, a);
      double e1 = 0.0, e2 = 0.0;
      for (int l = at.leaf_begin; l < at.leaf_end; ++l) {
        e1 += space.leaf_prob(l) * std::pow(spectral_norm(pair.hat(n, a) * ws.w_pos(l)), p);
        e2 += space.leaf_prob(l) * std::pow(spectral_norm(pair.tilde(n, a) * ws.w_neg(l)), pc);
      }
      s1 = std::max(s1, e1 / at.prob);
      s2 = std::max(s2, e2 / at.prob);
    }
  }
  return {s1, std::pow(s2, p / pc)};
}

double ap_equivalence_constant(double p, int d) {
  return 16.0 * std::pow(static_cast<double>(d), std::max(p, conjugate_exponent(p)) / 2.0);
}

}  // namespace wml
