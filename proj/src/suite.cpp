#include "wml/suite.hpp"

#include "wml/linalg.hpp"
#include "wml/operators.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <map>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <atomic>
#include <random>
#include <stdexcept>
#include <thread>

namespace wml {

namespace {

using Rng = std::mt19937_64;

// Splits `mass` into k random parts bounded away from zero.
std::vector<double> random_split(Rng& rng, double mass, int k) {
  std::uniform_real_distribution<double> u(0.15, 1.0);
  std::vector<double> parts(static_cast<size_t>(k));
  double sum = 0.0;
  for (double& x : parts) sum += (x = u(rng));
  for (double& x : parts) x *= mass / sum;
  return parts;
}

void grow(Rng& rng, TreeSpec& node, int level, int depth, bool dyadic, int& leaves, int cap) {
  if (level == depth) return;
  int k = 2;
  if (!dyadic) {
    std::uniform_int_distribution<int> b(1, 3);
    k = b(rng);
    if (leaves + (k - 1) > cap) k = 1;
  }
  leaves += k - 1;
  for (double m : random_split(rng, node.mass, k)) node.children.push_back(TreeSpec{m, {}});
  for (TreeSpec& c : node.children) grow(rng, c, level + 1, depth, dyadic, leaves, cap);
}

Mat random_orthogonal(Rng& rng, int d) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) a(i, k) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return Mat(qr.householderQ());
}

}  // namespace

std::uint64_t instance_seed(std::uint64_t suite_seed, int index) {
  std::uint64_t z = suite_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RandomInstance random_instance(std::uint64_t suite_seed, int index, const InstanceSpec& spec) {
  if (spec.min_depth < 1 || spec.max_depth < spec.min_depth) throw ValidationError("random_instance: bad depth range");
  if (spec.dims.empty() || spec.ps.empty()) throw ValidationError("random_instance: empty parameter lists");
  RandomInstance out;
  out.index = index;
  out.seed = instance_seed(suite_seed, index);
  Rng rng(out.seed);
  const int depth = std::uniform_int_distribution<int>(spec.min_depth, spec.max_depth)(rng);
  const int d = spec.dims[std::uniform_int_distribution<size_t>(0, spec.dims.size() - 1)(rng)];
  out.p = spec.ps[std::uniform_int_distribution<size_t>(0, spec.ps.size() - 1)(rng)];
  const bool dyadic = std::bernoulli_distribution(0.5)(rng) && (size_t{1} << depth) <= static_cast<size_t>(spec.leaf_cap);

  TreeSpec root{1.0, {}};
  int leaves = 1;
  grow(rng, root, 0, depth, dyadic, leaves, spec.leaf_cap);
  out.space = std::make_shared<const FilteredSpace>(FilteredSpace::from_tree(root));
  const int n = out.space->num_leaves();

  std::normal_distribution<double> g;
  const double sigma = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
  std::vector<Mat> mats;
  mats.reserve(static_cast<size_t>(n));
  for (int l = 0; l < n; ++l) {
    const Mat q = random_orthogonal(rng, d);
    Vec lam(d);
    for (int i = 0; i < d; ++i) lam(i) = std::exp(sigma * g(rng));
    Mat m = q * lam.asDiagonal() * q.transpose();
    mats.push_back(0.5 * (m + m.transpose()));
  }
  out.w = MatrixWeight(d, std::move(mats));

  out.f = LeafFunction::zeros(d, n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < d; ++i) out.f.values(i, l) = g(rng);
  // Zero a few subtrees so that vanishing denominators occur.
  const int zeros = std::uniform_int_distribution<int>(0, 2)(rng);
  for (int z = 0; z < zeros; ++z) {
    const int level = std::uniform_int_distribution<int>(1, depth)(rng);
    const int a = std::uniform_int_distribution<int>(0, out.space->num_atoms(level) - 1)(rng);
    const Atom& at = out.space->atom(level, a);
    for (int l = at.leaf_begin; l < at.leaf_end; ++l) out.f.at(l).setZero();
  }
  return out;
}

bool InstanceReport::equivalents_ok() const {
  const double c = equiv_const;
  return q1_ratio >= 1.0 / c && q1_ratio <= c && q2_ratio >= 1.0 / c && q2_ratio <= c;
}

InstanceReport check_instance(const RandomInstance& inst, const SuiteOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  InstanceReport r;
  const FilteredSpace& space = *inst.space;
  r.index = inst.index;
  r.depth = space.depth();
  r.d = inst.w.dim();
  r.p = inst.p;
  r.leaves = space.num_leaves();

  const WeightedSpace ws(inst.space, inst.w, inst.p);
  ReducerOptions ro;
  ro.tol = opts.reducer_tol;
  const ReducingPair pair = reduce_all(ws, ro);
  r.ap = ap_characteristic(pair);

  const PrincipalContext ctx(ws, pair, inst.f);
  const PrincipalFamily family = build_principal_family(ctx, opts.cgamma);
  r.generations = family.num_generations();
  r.sets = static_cast<int>(family.sets.size());
  r.props = check_properties(family, ctx, opts.tol);

  for (int n = 0; n < space.depth(); ++n)
    for (const HalvingResult& h : halving_by_atom(ctx, n, opts.cgamma)) {
      if (!h.ok()) r.halving = false;
      if (h.above > 0.0) r.halving_worst = std::max(r.halving_worst, h.below > 0.0 ? h.above / h.below : HUGE_VAL);
    }

  r.iteration = iteration_check(family, ctx, opts.tol);
  r.vanish = vanish_checks(family, ctx, opts.tol);
  r.domination = sparse_domination_check(family, ctx);

  const double pc = ws.p_conj();
  r.dual_ap = ap_characteristic(pair.exchanged());
  const double expect = std::pow(r.ap, pc - 1.0);
  r.dual_rel_err = std::abs(r.dual_ap - expect) / expect;

  const ApEquivalents eq = ap_equivalents(ws, pair);
  r.q1_ratio = eq.q1 / r.ap;
  r.q2_ratio = eq.q2 / r.ap;
  r.equiv_const = ap_equivalence_constant(inst.p, r.d);

  // Pointwise Hoelder step between the sparse operators.
  const SparseFamily sparse = family.to_sparse();
  const LeafFunction t2 = sparse_op_matrix(ws, pair, sparse, 2.0, inst.f);
  const LeafFunction tp = sparse_op_matrix(ws, pair, sparse, inst.p, inst.f);
  std::optional<LeafFunction> t1;
  const double theta = inst.p / (2.0 * inst.p - 2.0);
  if (inst.p > 2.0) t1 = sparse_op_matrix(ws, pair, sparse, 1.0, inst.f);
  for (int l = 0; l < space.num_leaves(); ++l) {
    const double lhs = t2.values(0, l);
    const double rhs = t1 ? std::pow(t1->values(0, l), 1.0 - theta) * std::pow(tp.values(0, l), theta) : tp.values(0, l);
    if (lhs > rhs * (1.0 + opts.tol) + opts.tol * ctx.scale()) r.holder = false;
    if (rhs > 0.0) r.holder_worst = std::max(r.holder_worst, lhs / rhs);
    else if (lhs > 0.0) r.holder_worst = HUGE_VAL;
  }

  if (opts.reducing_bounds) {
    const ReducingBoundsReport rb = verify_reducing_bounds(ws, pair);
    r.tilde_bound_ratio = rb.tilde_max / rb.tilde_bound;
    r.hat_bound_ratio = rb.hat_max / rb.hat_bound;
  }

  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (opts.certify_directions > 0) {
    const auto t1 = std::chrono::steady_clock::now();
    r.certification = certify_reducers(ws, pair, opts.certify_directions, opts.certify_seed);
    if (std::abs(inst.p - 2.0) < 1e-15) {
      ReducerOptions exact = ro;
      exact.exact_p2 = true;
      const ReducingPair ex = reduce_all(ws, exact);
      std::vector<std::vector<Mat>> a, b;
      for (int n = 0; n <= pair.depth(); ++n) {
        a.push_back(pair.tilde_level(n));
        a.push_back(pair.hat_level(n));
        b.push_back(ex.tilde_level(n));
        b.push_back(ex.hat_level(n));
      }
      r.exact_cross = compare_reducers(a, b, opts.certify_directions, opts.certify_seed + 1);
    }
    r.certify_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  }
  return r;
}

std::vector<InstanceReport> run_suite(std::uint64_t seed, int count, const InstanceSpec& spec, const SuiteOptions& opts,
                                      int threads) {
  if (count < 1) throw ValidationError("run_suite: count must be >= 1");
  std::vector<InstanceReport> out(static_cast<size_t>(count));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        out[static_cast<size_t>(i)] = check_instance(random_instance(seed, i, spec), opts);
      } catch (...) {
        errors[static_cast<size_t>(i)] = std::current_exception();
      }
    }
  };
  const int t = std::clamp(threads, 1, count);
  if (t == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double depth_trend(const std::vector<std::pair<int, double>>& depth_value) {
  std::map<int, double> best;
  for (const auto& [depth, v] : depth_value) {
    auto [it, fresh] = best.emplace(depth, v);
    if (!fresh) it->second = std::max(it->second, v);
  }
  if (best.size() < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (const auto& [depth, v] : best) {
    if (!(v > 0.0)) throw ValidationError("depth_trend: values must be positive");
    mx += depth;
    my += std::log(v);
  }
  const double n = static_cast<double>(best.size());
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [depth, v] : best) {
    sxx += (depth - mx) * (depth - mx);
    sxy += (depth - mx) * (std::log(v) - my);
  }
  return sxy / sxx;
}

namespace {

std::string per_depth_max(const std::vector<std::pair<int, double>>& depth_value) {
  std::map<int, double> best;
  for (const auto& [depth, v] : depth_value) best[depth] = std::max(best[depth], v);
  std::string out;
  char buf[48];
  for (const auto& [depth, v] : best) {
    std::snprintf(buf, sizeof buf, "%s%d:%.4g", out.empty() ? "" : " ", depth, v);
    out += buf;
  }
  return out;
}

}  // namespace

bool SuiteSummary::pass() const {
  return std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.pass || !l.gating; });
}

const CheckLine& SuiteSummary::line(const std::string& name) const {
  for (const CheckLine& l : lines)
    if (l.name == name) return l;
  throw std::out_of_range("no check line named " + name);
}

SuiteSummary summarize(const std::vector<InstanceReport>& reports, const SuiteOptions& opts) {
  SuiteSummary s;
  s.instances = static_cast<int>(reports.size());
  int prop_fail = 0, halving_fail = 0, iter_fail = 0, vanish_fail = 0, dom_fail = 0, holder_fail = 0, eq_fail = 0,
      dual_fail = 0, cert_fail = 0, cross_fail = 0, tail_fail = 0;
  double halving_worst = 0, iter_worst = 0, vanish_worst = 0, dom_worst = 0, holder_worst = 0, dual_worst = 0;
  double eq_worst = 0, eq_bound = 0, tilde_worst = 0, hat_worst = 0;
  double cert_upper = 0, cert_lower = HUGE_VAL, cross_upper = 0, cross_lower = HUGE_VAL;
  std::vector<std::pair<int, double>> dom_by_depth, eq_by_depth;
  bool any_cert = false, any_cross = false;
  for (const InstanceReport& r : reports) {
    s.seconds += r.seconds;
    s.certify_seconds += r.certify_seconds;
    prop_fail += !r.props.all();
    halving_fail += !r.halving;
    halving_worst = std::max(halving_worst, r.halving_worst);
    iter_fail += !r.iteration.ok();
    tail_fail += !r.iteration.tail_zero;
    iter_worst = std::max({iter_worst, r.iteration.worst_ratio, r.iteration.worst_step_ratio});
    vanish_fail += !r.vanish.ok();
    if (r.vanish.tol > 0.0)
      vanish_worst = std::max(vanish_worst, std::max(r.vanish.tau_inf_max, r.vanish.pre_kappa_max) / r.vanish.tol);
    dom_fail += !r.domination.pass();
    dom_worst = std::max(dom_worst, r.domination.max_ratio);
    if (r.domination.max_ratio > 0.0) dom_by_depth.emplace_back(r.depth, r.domination.max_ratio);
    holder_fail += !r.holder;
    holder_worst = std::max(holder_worst, r.holder_worst);
    dual_fail += !r.dual_ok(kDualTol);
    dual_worst = std::max(dual_worst, r.dual_rel_err);
    eq_fail += !r.equivalents_ok();
    const double e = std::max({r.q1_ratio, 1.0 / r.q1_ratio, r.q2_ratio, 1.0 / r.q2_ratio});
    if (e > eq_worst) {
      eq_worst = e;
      eq_bound = r.equiv_const;
    }
    eq_by_depth.emplace_back(r.depth, e);
    tilde_worst = std::max(tilde_worst, r.tilde_bound_ratio);
    hat_worst = std::max(hat_worst, r.hat_bound_ratio);
    if (r.certification) {
      any_cert = true;
      cert_fail += !r.certification->within(opts.reducer_tol, r.d);
      cert_upper = std::max(cert_upper, r.certification->upper_max);
      cert_lower = std::min(cert_lower, r.certification->lower_min * std::sqrt(static_cast<double>(r.d)));
    }
    if (r.exact_cross) {
      any_cross = true;
      const CertificationReport c{r.exact_cross->upper, r.exact_cross->lower, 0};
      cross_fail += !c.within(opts.reducer_tol, r.d);
      cross_upper = std::max(cross_upper, r.exact_cross->upper);
      cross_lower = std::min(cross_lower, r.exact_cross->lower * std::sqrt(static_cast<double>(r.d)));
    }
  }
  auto failing = [](int n) { return std::to_string(n) + " failing instance(s)"; };
  const double kdom = k_domination(opts.cgamma);
  s.lines.push_back({"properties", prop_fail == 0, true, static_cast<double>(prop_fail), 0.0,
                     "principal-set properties (a)-(f), nesting, sibling disjointness; " + failing(prop_fail)});
  s.lines.push_back({"halving", halving_fail == 0, true, halving_worst, 1.0,
                     "max P(A, sup gamma > C) / P(A, sup gamma <= C) over single atoms; " + failing(halving_fail)});
  s.lines.push_back({"iteration", iter_fail == 0, true, iter_worst, 1.0,
                     "max lhs / rhs of the one-step and iterated b_m inequalities; " + failing(iter_fail)});
  s.lines.push_back({"tail_zero", tail_fail == 0, true, static_cast<double>(tail_fail), 0.0,
                     "b_m identically 0 beyond the last generation"});
  s.lines.push_back({"vanishing", vanish_fail == 0, true, vanish_worst, 1.0,
                     "max residual / tolerance on {tau_1 = inf} and before kappa_2 on P_1"});
  s.lines.push_back({"domination", dom_fail == 0, true, dom_worst, kdom, "max S_W f / T_{W,2} f against K_dom"});
  const double dtrend = depth_trend(dom_by_depth);
  s.lines.push_back({"domination_trend", std::abs(dtrend) <= kTrendWindow, true, dtrend, kTrendWindow,
                     "OLS slope of log(per-depth max ratio) vs depth; maxima " + per_depth_max(dom_by_depth)});
  s.lines.push_back({"duality", dual_fail == 0, true, dual_worst, kDualTol,
                     "max relative error of [V]_{A_p'} against [W]_{A_p}^{p'-1}"});
  s.lines.push_back({"equivalents", eq_fail == 0, true, eq_worst, eq_bound,
                     "max of q/[W] and [W]/q over q1, q2, against 16 d^{max(p,p')/2}"});
  const double etrend = depth_trend(eq_by_depth);
  s.lines.push_back({"equivalents_trend", std::abs(etrend) <= kTrendWindow, true, etrend, kTrendWindow,
                     "OLS slope of log(per-depth max deviation) vs depth; maxima " + per_depth_max(eq_by_depth)});
  s.lines.push_back({"holder", holder_fail == 0, true, holder_worst, 1.0,
                     "max T_2 / (T_1^{1-theta} T_p^theta) for p > 2, T_2 / T_p for p <= 2"});
  if (opts.reducing_bounds) {
    s.lines.push_back({"reducing_bounds", tilde_worst <= 1.0 && hat_worst <= 1.0, false, std::max(tilde_worst, hat_worst),
                       1.0, "max average of ||W^{+-1/p} A^-1||^q over its d^{q/2}(1+tol)^q bound (report-only)"});
  }
  if (any_cert) {
    s.lines.push_back({"certification", cert_fail == 0, true, cert_upper, 1.0 + opts.reducer_tol,
                       "held-out max ||A e|| / rho(e); min times sqrt(d) = " + std::to_string(cert_lower) +
                           " against " + std::to_string(1.0 / (1.0 + opts.reducer_tol))});
  }
  if (any_cross) {
    s.lines.push_back({"exact_cross_check", cross_fail == 0, true, cross_upper, 1.0 + opts.reducer_tol,
                       "p = 2 ellipsoid vs exact reducers: max ratio; min times sqrt(d) = " +
                           std::to_string(cross_lower)});
  }
  return s;
}

}  // namespace wml
