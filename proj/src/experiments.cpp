#include "wml/experiments.hpp"

#include "wml/linalg.hpp"
#include "wml/operators.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace wml {

namespace {

std::vector<double> midpoints(int depth) {
  const size_t n = size_t{1} << depth;
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) x[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return x;
}

// Givens rotation in the (i, j) plane.
Mat givens(int d, int i, int j, double t) {
  Mat r = Mat::Identity(d, d);
  r(i, i) = std::cos(t);
  r(j, j) = std::cos(t);
  r(i, j) = -std::sin(t);
  r(j, i) = std::sin(t);
  return r;
}

// Leafwise martingale difference operators on scalar functions.
class ScalarDiffs {
 public:
  ScalarDiffs(const FilteredSpace& space, DiffConvention conv) : space_(space), conv_(conv) {}

  // Per leaf value of E_n u for every level n (flattened [n][leaf]).
  std::vector<Eigen::VectorXd> level_values(const Eigen::VectorXd& u) const {
    const int d = space_.depth();
    std::vector<Eigen::VectorXd> out(static_cast<size_t>(d) + 1);
    std::vector<double> sums(static_cast<size_t>(space_.num_leaves()));
    for (int l = 0; l < space_.num_leaves(); ++l) sums[static_cast<size_t>(l)] = space_.leaf_prob(l) * u(l);
    std::vector<double> level_sum = sums;
    for (int n = d; n >= 0; --n) {
      if (n < d) {
        std::vector<double> up(static_cast<size_t>(space_.num_atoms(n)), 0.0);
        for (int a = 0; a < space_.num_atoms(n + 1); ++a)
          up[static_cast<size_t>(space_.atom(n + 1, a).parent)] += level_sum[static_cast<size_t>(a)];
        level_sum = std::move(up);
      }
      Eigen::VectorXd v(space_.num_leaves());
      const auto map = space_.atom_map(n);
      for (int l = 0; l < space_.num_leaves(); ++l) {
        const int a = map[static_cast<size_t>(l)];
        v(l) = level_sum[static_cast<size_t>(a)] / space_.atom(n, a).prob;
      }
      out[static_cast<size_t>(n)] = std::move(v);
    }
    return out;
  }

  Eigen::VectorXd diff(const std::vector<Eigen::VectorXd>& lv, int k) const {
    if (k == 1 && conv_ == DiffConvention::kFoldMean) return lv[1];
    return lv[static_cast<size_t>(k)] - lv[static_cast<size_t>(k) - 1];
  }

  // sum_k D_k (w D_k v)
  Eigen::VectorXd form(const Eigen::VectorXd& w, const Eigen::VectorXd& v) const {
    const auto lv = level_values(v);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (int k = 1; k <= space_.depth(); ++k) {
      const Eigen::VectorXd u = w.cwiseProduct(diff(lv, k));
      out += diff_single(u, k);
    }
    return out;
  }

 private:
  Eigen::VectorXd diff_single(const Eigen::VectorXd& u, int k) const {
    LeafFunction f(u.transpose());
    const LeafFunction ek = lift(space_, cond_expect(space_, f, k), k);
    if (k == 1 && conv_ == DiffConvention::kFoldMean) return ek.values.row(0).transpose();
    const LeafFunction em = lift(space_, cond_expect(space_, f, k - 1), k - 1);
    return (ek.values.row(0) - em.values.row(0)).transpose();
  }

  const FilteredSpace& space_;
  DiffConvention conv_;
};

double l2p(const FilteredSpace& space, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (int l = 0; l < space.num_leaves(); ++l) s += space.leaf_prob(l) * a(l) * b(l);
  return s;
}

Eigen::VectorXd check_scalar_weight(const FilteredSpace& space, const std::vector<double>& w) {
  if (static_cast<int>(w.size()) != space.num_leaves()) throw ValidationError("weight size does not match leaf count");
  Eigen::VectorXd out(space.num_leaves());
  for (int l = 0; l < space.num_leaves(); ++l) {
    if (!(w[static_cast<size_t>(l)] > 0.0) || !std::isfinite(w[static_cast<size_t>(l)]))
      throw ValidationError("weight must be positive and finite");
    out(l) = w[static_cast<size_t>(l)];
  }
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

ScalarInstance gen_power_weight(int depth, double alpha, double eps) {
  if (!(eps > 0.0)) throw ValidationError("gen_power_weight: eps must be positive");
  if (!(alpha > -1.0)) throw ValidationError("gen_power_weight: alpha must exceed -1");
  auto space = std::make_shared<const FilteredSpace>(FilteredSpace::dyadic(depth));
  const auto x = midpoints(depth);
  std::vector<double> w(x.size());
  double mean = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    w[i] = std::pow(x[i] + eps, alpha);
    mean += w[i];
  }
  mean /= static_cast<double>(w.size());
  for (double& v : w) v /= mean;
  return {space, std::move(w)};
}

MatrixInstance gen_rotating_matrix_weight(int depth, int d, double alpha, double eps, bool rotate) {
  if (d < 2 || d > 3) throw ValidationError("gen_rotating_matrix_weight: d must be 2 or 3");
  if (!(eps > 0.0)) throw ValidationError("gen_rotating_matrix_weight: eps must be positive");
  auto space = std::make_shared<const FilteredSpace>(FilteredSpace::dyadic(depth));
  const auto x = midpoints(depth);
  const double beta = 1.0 / (d - 1);
  std::vector<Mat> leaves;
  leaves.reserve(x.size());
  for (double xi : x) {
    Vec lam(d);
    lam(0) = std::pow(xi + eps, alpha);
    for (int i = 1; i < d; ++i) lam(i) = std::pow(xi + eps, -alpha * beta);
    Mat r = Mat::Identity(d, d);
    if (rotate) {
      r = givens(d, 0, 1, std::numbers::pi * xi);
      if (d == 3) r = r * givens(d, 1, 2, 0.5 * std::numbers::pi * xi);
    }
    Mat m = r * lam.asDiagonal() * r.transpose();
    leaves.push_back(0.5 * (m + m.transpose()));
  }
  return {space, MatrixWeight(d, std::move(leaves))};
}

PowerIterationResult estimate_opnorm_p2(const FilteredSpace& space, const std::vector<double>& w_in,
                                        DiffConvention conv, double rel_tol, int max_iter) {
  const Eigen::VectorXd w = check_scalar_weight(space, w_in);
  const Eigen::VectorXd wi = w.cwiseSqrt().cwiseInverse();
  const ScalarDiffs ops(space, conv);
  auto apply = [&](const Eigen::VectorXd& h) -> Eigen::VectorXd {
    return wi.cwiseProduct(ops.form(w, wi.cwiseProduct(h)));
  };
  std::mt19937_64 rng(0x2545F4914F6CDD1DULL);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd h(space.num_leaves());
  for (int l = 0; l < h.size(); ++l) h(l) = gauss(rng);
  h /= std::sqrt(l2p(space, h, h));
  double theta = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd bh = apply(h);
    theta = l2p(space, h, bh);
    const Eigen::VectorXd r = bh - theta * h;
    const double res = std::sqrt(std::max(0.0, l2p(space, r, r)));
    const double nb = std::sqrt(l2p(space, bh, bh));
    if (!(nb > 0.0)) return {0.0, it, LeafFunction::zeros(1, space.num_leaves())};
    if (res <= rel_tol * theta) {
      LeafFunction f(wi.cwiseProduct(h).transpose());
      return {std::sqrt(theta), it, std::move(f)};
    }
    h = bh / nb;
  }
  throw ConvergenceError("estimate_opnorm_p2: iteration cap reached", std::sqrt(std::max(0.0, theta)));
}

double dense_opnorm_p2(const FilteredSpace& space, const std::vector<double>& w_in, DiffConvention conv) {
  const Eigen::VectorXd w = check_scalar_weight(space, w_in);
  const int n = space.num_leaves();
  if (n > 4096) throw ValidationError("dense_opnorm_p2: space too large");
  const ScalarDiffs ops(space, conv);
  // Quadratic forms in the coordinates y = P^{1/2} f: Q = P^{1/2} F P^{-1/2}, G = diag(w).
  Eigen::MatrixXd q(n, n);
  Eigen::VectorXd sp(n);
  for (int l = 0; l < n; ++l) sp(l) = std::sqrt(space.leaf_prob(l));
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(j) = 1.0 / sp(j);
    q.col(j) = sp.cwiseProduct(ops.form(w, e));
  }
  q = 0.5 * (q + q.transpose()).eval();
  const Eigen::VectorXd wis = w.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd b = wis.asDiagonal() * q * wis.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double opnorm_ratio(const WeightedSpace& ws, const LeafFunction& f, DiffConvention conv) {
  const double den = lp_norm(ws.space(), f, ws.p());
  if (!(den > 0.0)) return 0.0;
  return lp_norm(ws.space(), weighted_square_fn(ws, f, conv), ws.p()) / den;
}

namespace {

// Phi(f) = ||S_W f||_p^p and its L^2(P) gradient.
struct Ascent {
  const WeightedSpace& ws;
  DiffConvention conv;

  double phi(const LeafFunction& f) const {
    const LeafFunction s = weighted_square_fn(ws, f, conv);
    const double nrm = lp_norm(ws.space(), s, ws.p());
    return std::pow(nrm, ws.p());
  }

  LeafFunction gradient(const LeafFunction& f) const {
    const FilteredSpace& space = ws.space();
    const double p = ws.p();
    const int dl = space.depth();
    const Martingale mg(space, ws.apply_neg(f), conv);
    Eigen::VectorXd s2 = Eigen::VectorXd::Zero(space.num_leaves());
    std::vector<Eigen::MatrixXd> dk(static_cast<size_t>(dl) + 1);
    for (int k = 1; k <= dl; ++k) {
      dk[static_cast<size_t>(k)] = lift(space, mg.diff(k), k).values;
      for (int l = 0; l < space.num_leaves(); ++l)
        s2(l) += (ws.w_pos(l) * dk[static_cast<size_t>(k)].col(l)).squaredNorm();
    }
    Eigen::VectorXd phi(space.num_leaves());
    for (int l = 0; l < space.num_leaves(); ++l) phi(l) = s2(l) > 0.0 ? p * std::pow(s2(l), p / 2.0 - 1.0) : 0.0;
    LeafFunction gg = LeafFunction::zeros(f.dim(), space.num_leaves());
    for (int k = 1; k <= dl; ++k) {
      LeafFunction u = LeafFunction::zeros(f.dim(), space.num_leaves());
      for (int l = 0; l < space.num_leaves(); ++l) {
        const Mat& wp = ws.w_pos(l);
        u.at(l) = phi(l) * (wp * (wp * dk[static_cast<size_t>(k)].col(l)));
      }
      const LeafFunction ek = lift(space, cond_expect(space, u, k), k);
      gg.values += ek.values;
      if (!(k == 1 && conv == DiffConvention::kFoldMean))
        gg.values -= lift(space, cond_expect(space, u, k - 1), k - 1).values;
    }
    return ws.apply_neg(gg);
  }
};

double pairing(const FilteredSpace& space, const LeafFunction& a, const LeafFunction& b) {
  double s = 0.0;
  for (int l = 0; l < space.num_leaves(); ++l) s += space.leaf_prob(l) * a.at(l).dot(b.at(l));
  return s;
}

void normalize_lp(const FilteredSpace& space, LeafFunction& f, double p) {
  const double n = lp_norm(space, f, p);
  if (n > 0.0) f.values /= n;
}

}  // namespace

OpnormEstimate estimate_opnorm_general(const WeightedSpace& ws, int restarts, std::uint64_t seed, DiffConvention conv,
                                       int max_iter) {
  if (restarts < 1) throw ValidationError("estimate_opnorm_general: restarts must be >= 1");
  const FilteredSpace& space = ws.space();
  const double p = ws.p();
  const double pc = ws.p_conj();
  const Ascent asc{ws, conv};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  OpnormEstimate best;
  best.witness = LeafFunction::zeros(ws.dim(), space.num_leaves());

  for (int r = 0; r < restarts; ++r) {
    LeafFunction f = LeafFunction::zeros(ws.dim(), space.num_leaves());
    if (r == 0) {
      // Top-level Haar function in the first coordinate.
      const Atom& root = space.atom(0, 0);
      const Atom& first = space.atom(1, root.child_begin);
      for (int l = 0; l < space.num_leaves(); ++l) f.values(0, l) = l < first.leaf_end ? 1.0 / first.prob : -1.0 / (1.0 - first.prob);
    } else {
      for (int l = 0; l < space.num_leaves(); ++l)
        for (int i = 0; i < ws.dim(); ++i) f.values(i, l) = gauss(rng);
    }
    if (!(lp_norm(space, f, p) > 0.0)) f.values.setOnes();
    normalize_lp(space, f, p);
    double value = asc.phi(f);

    // Finite-difference check of the ascent direction at the starting point.
    {
      LeafFunction dir = LeafFunction::zeros(ws.dim(), space.num_leaves());
      for (int l = 0; l < space.num_leaves(); ++l)
        for (int i = 0; i < ws.dim(); ++i) dir.values(i, l) = gauss(rng);
      const double h = 1e-6;
      LeafFunction fp = f, fm = f;
      fp.values += h * dir.values;
      fm.values -= h * dir.values;
      const double fd = (asc.phi(fp) - asc.phi(fm)) / (2.0 * h);
      const double an = pairing(space, asc.gradient(f), dir);
      const double rel = std::abs(fd - an) / std::max({std::abs(an), std::abs(fd), 1e-12 * value, 1e-300});
      best.fd_max_rel_error = std::max(best.fd_max_rel_error, rel);
    }

    for (int it = 0; it < max_iter; ++it) {
      const LeafFunction g = asc.gradient(f);
      LeafFunction next = g;
      for (int l = 0; l < space.num_leaves(); ++l) {
        const double nrm = g.at(l).norm();
        next.at(l) = nrm > 0.0 ? Eigen::VectorXd(std::pow(nrm, pc - 2.0) * g.at(l)) : Eigen::VectorXd::Zero(ws.dim());
      }
      if (!(lp_norm(space, next, p) > 0.0)) break;
      normalize_lp(space, next, p);
      const double nv = asc.phi(next);
      ++best.iterations;
      if (!(nv > value * (1.0 + 1e-12))) {
        if (nv > value) {
          f = std::move(next);
          value = nv;
        }
        break;
      }
      f = std::move(next);
      value = nv;
    }
    const double ratio = opnorm_ratio(ws, f, conv);
    if (ratio > best.ratio) {
      best.ratio = ratio;
      best.witness = f;
    }
    ++best.restarts;
  }
  return best;
}

FitResult exponent_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw ValidationError("exponent_fit: need at least 3 points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [a, r] : points) {
    if (!(a > 0.0) || !(r > 0.0)) throw ValidationError("exponent_fit: values must be positive");
    mx += std::log(a);
    my += std::log(r);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [a, r] : points) {
    const double dx = std::log(a) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(r) - my);
  }
  if (!(sxx > 1e-24 * n)) throw ValidationError("exponent_fit: degenerate spread in ap_char");
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (const auto& [a, r] : points) {
    const double e = std::log(r) - fit.intercept - fit.slope * std::log(a);
    ssr += e * e;
  }
  fit.std_err = points.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
  fit.n = static_cast<int>(points.size());
  return fit;
}

double scalar_target_exponent(double p) { return std::max(0.5, 1.0 / (p - 1.0)); }

double matrix_target_exponent(double p) { return std::max(0.5 + 1.0 / (p * (p - 1.0)), 1.0 / (p - 1.0)); }

namespace {

struct SweepPoint {
  int depth;
  double alpha;
  double eps;
};

std::uint64_t point_seed(std::uint64_t seed, int index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SweepRecord run_point(const SweepConfig& cfg, const SweepPoint& pt, int id) {
  SweepRecord rec;
  rec.id = id;
  rec.family = cfg.family;
  rec.p = cfg.p;
  rec.d = cfg.family == "power" ? 1 : cfg.d;
  rec.depth = pt.depth;
  rec.alpha = pt.alpha;
  rec.eps = pt.eps;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::shared_ptr<const FilteredSpace> space;
    std::vector<double> scalar;
    MatrixWeight w = MatrixWeight::identity(1, 1);
    if (cfg.family == "power") {
      ScalarInstance inst = gen_power_weight(pt.depth, pt.alpha, pt.eps);
      space = inst.space;
      scalar = inst.w;
      w = MatrixWeight::scalar(inst.w);
    } else {
      MatrixInstance inst = gen_rotating_matrix_weight(pt.depth, cfg.d, pt.alpha, pt.eps);
      space = inst.space;
      w = inst.w;
    }
    const WeightedSpace ws(space, w, cfg.p);
    ReducerOptions ro;
    ro.tol = cfg.reducer_tol;
    rec.ap_char = ap_characteristic(ws, ro);
    std::string est = cfg.estimator;
    if (est == "auto") est = (rec.d == 1 && std::abs(cfg.p - 2.0) < 1e-15) ? "p2" : "general";
    if (est == "p2") {
      if (rec.d != 1 || std::abs(cfg.p - 2.0) >= 1e-15) throw ValidationError("p2 estimator needs d = 1 and p = 2");
      const PowerIterationResult r = estimate_opnorm_p2(*space, scalar);
      rec.ratio = r.ratio;
      rec.iterations = r.iterations;
      rec.restarts = 1;
    } else {
      const OpnormEstimate r = estimate_opnorm_general(ws, cfg.restarts, point_seed(cfg.seed, id));
      rec.ratio = r.ratio;
      rec.iterations = r.iterations;
      rec.restarts = r.restarts;
    }
  } catch (const ConvergenceError& e) {
    rec.status = "error: " + std::string(e.what());
    rec.ratio = e.last_value();
  } catch (const std::exception& e) {
    rec.status = "error: " + std::string(e.what());
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace

SweepResult theorem_sweep(const SweepConfig& cfg) {
  if (cfg.family != "power" && cfg.family != "rotating") throw ValidationError("sweep: unknown family '" + cfg.family + "'");
  if (!(cfg.p > 1.0)) throw ValidationError("sweep: p must exceed 1");
  if (cfg.estimator != "auto" && cfg.estimator != "p2" && cfg.estimator != "general")
    throw ValidationError("sweep: unknown estimator '" + cfg.estimator + "'");
  std::vector<SweepPoint> grid;
  for (int depth : cfg.depths) {
    if (depth < 1) throw ValidationError("sweep: depth must be >= 1");
    const std::vector<double> eps = cfg.eps.empty() ? std::vector<double>{std::ldexp(1.0, -depth)} : cfg.eps;
    for (double a : cfg.alphas)
      for (double e : eps) grid.push_back({depth, a, e});
  }
  if (grid.empty()) throw ValidationError("sweep: empty parameter grid");

  SweepResult out;
  out.records.resize(grid.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < grid.size(); i = next++) out.records[i] = run_point(cfg, grid[i], static_cast<int>(i));
  };
  const int threads = std::max(1, std::min<int>(cfg.parallel, static_cast<int>(grid.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  try {
    out.fit = exponent_fit(fit_points(out.records));
    out.fit_ok = true;
  } catch (const ValidationError&) {
    out.fit_ok = false;
  }
  return out;
}

std::vector<std::pair<double, double>> fit_points(const std::vector<SweepRecord>& records, double lo, double hi) {
  std::vector<std::pair<double, double>> pts;
  for (const SweepRecord& r : records)
    if (r.status == "ok" && r.ap_char >= lo && r.ap_char <= hi && r.ratio > 0.0) pts.emplace_back(r.ap_char, r.ratio);
  return pts;
}

std::vector<SlopeWindow> slope_windows(std::uint64_t seed, int parallel) {
  std::vector<SlopeWindow> out;
  auto run = [&](SlopeWindow w, SweepConfig cfg, double ap_lo, double ap_hi) {
    cfg.seed = seed;
    cfg.parallel = parallel;
    const SweepResult res = theorem_sweep(cfg);
    for (const SweepRecord& r : res.records) w.errors += r.status != "ok";
    try {
      w.fit = exponent_fit(fit_points(res.records, ap_lo, ap_hi));
      w.fit_ok = true;
    } catch (const ValidationError&) {
      w.fit_ok = false;
    }
    out.push_back(std::move(w));
  };

  SweepConfig probe;
  probe.family = "power";
  probe.p = 2.0;
  probe.depths = {6, 7, 8, 9, 10};
  probe.alphas.clear();
  for (int i = 0; i <= 12; ++i) probe.alphas.push_back(0.25 * i);
  run({"scalar_p2_probe", "power", 2.0, 1, {}, false, 0.75, 1.05, 0}, probe, 1.0, 1e3);

  for (const std::string family : {"power", "rotating"}) {
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
      SweepConfig c;
      c.family = family;
      c.p = p;
      c.d = family == "power" ? 1 : 2;
      c.depths = {4, 6, 8};
      c.alphas = {0.0, 0.5, 1.0, 1.5, 2.0};
      c.restarts = 3;
      const double target = family == "power" ? scalar_target_exponent(p) : matrix_target_exponent(p);
      char name[64];
      std::snprintf(name, sizeof name, "upper_%s_p%g", family.c_str(), p);
      run({name, family, p, c.d, {}, false, -HUGE_VAL, target + 0.1, 0}, c, 0.0, HUGE_VAL);
    }
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRecord>& records) {
  std::ostringstream os;
  os << "id,family,p,d,depth,alpha,eps,ap_char,ratio,iterations,restarts,status\n";
  for (const SweepRecord& r : records) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    os << r.id << ',' << r.family << ',' << fmt(r.p) << ',' << r.d << ',' << r.depth << ',' << fmt(r.alpha) << ','
       << fmt(r.eps) << ',' << fmt(r.ap_char) << ',' << fmt(r.ratio) << ',' << r.iterations << ',' << r.restarts << ','
       << status << '\n';
  }
  return os.str();
}

std::string timing_csv(const std::vector<SweepRecord>& records) {
  std::ostringstream os;
  os << "id,seconds\n";
  for (const SweepRecord& r : records) os << r.id << ',' << fmt(r.seconds) << '\n';
  return os.str();
}

std::vector<SweepRecord> parse_sweep_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("sweep csv: empty input");
  std::vector<SweepRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw ValidationError("sweep csv: expected 12 columns");
    try {
      SweepRecord r;
      r.id = std::stoi(cells[0]);
      r.family = cells[1];
      r.p = std::stod(cells[2]);
      r.d = std::stoi(cells[3]);
      r.depth = std::stoi(cells[4]);
      r.alpha = std::stod(cells[5]);
      r.eps = std::stod(cells[6]);
      r.ap_char = std::stod(cells[7]);
      r.ratio = std::stod(cells[8]);
      r.iterations = std::stoi(cells[9]);
      r.restarts = std::stoi(cells[10]);
      r.status = cells[11];
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ValidationError("sweep csv: malformed number");
    }
  }
  return out;
}

}  // namespace wml
