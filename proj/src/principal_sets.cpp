#include "wml/principal_sets.hpp"

#include "wml/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace wml {

namespace {

constexpr double kFirstGenThreshold = 1e-12;
constexpr double kZeroRel = 1e-14;

struct Stop {
  int level;
  int atom;
};

// Descends from a level-n atom, stopping each branch at the first level m > n with
// gamma(n, m) > threshold. Branches that never stop reach the leaves.
std::vector<Stop> stopping_walk(const PrincipalContext& ctx, int n, int a, double threshold) {
  std::vector<Stop> stops;
  if (!ctx.live(n, a)) return stops;
  const FilteredSpace& space = ctx.space();
  const Eigen::MatrixXd h = ctx.pair().hat_inv(n, a);
  const double den = ctx.den(n, a);
  std::vector<std::pair<int, double>> frontier{{a, 0.0}};
  for (int m = n + 1; m <= space.depth() && !frontier.empty(); ++m) {
    std::vector<std::pair<int, double>> next;
    const LevelFunction& dm = ctx.g().diff(m);
    const LevelFunction& gm = ctx.g().level(m);
    for (const auto& [b, s] : frontier) {
      const Atom& at = space.atom(m - 1, b);
      for (int c = at.child_begin; c < at.child_end; ++c) {
        const double s1 = s + (h * dm.col(c)).squaredNorm();
        const double g1 = std::sqrt(s1) / den;
        const double g2 = (h * gm.col(c)).norm() / den;
        if (std::max(g1, g2) > threshold)
          stops.push_back({m, c});
        else
          next.emplace_back(c, s1);
      }
    }
    frontier = std::move(next);
  }
  return stops;
}

bool le_slack(double lhs, double rhs, double tol, double scale) { return lhs <= rhs + tol * (rhs + scale); }

std::vector<int> leaves_of(const FilteredSpace& space, int level, const std::vector<int>& atoms) {
  std::vector<int> out;
  for (int a : atoms)
    for (int l = space.atom(level, a).leaf_begin; l < space.atom(level, a).leaf_end; ++l) out.push_back(l);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

PrincipalContext::PrincipalContext(const WeightedSpace& ws, const ReducingPair& pair, const LeafFunction& f,
                                   DiffConvention conv)
    : ws_(ws), pair_(pair), f_(f), g_(ws.space(), ws.apply_neg(f), conv), den_(hat_averages(ws, pair, f)) {
  if (pair.depth() != ws.space().depth()) throw ValidationError("PrincipalContext: reducers do not match the space");
  zero_floor_ = kZeroRel * den_[0][0];
  for (const auto& lv : den_)
    for (double v : lv) scale_ = std::max(scale_, v);
}

GammaTable gamma_table(const PrincipalContext& ctx, int n) {
  const FilteredSpace& space = ctx.space();
  if (n < 0 || n >= space.depth()) throw ValidationError("gamma_table: base level must satisfy 0 <= n < D");
  GammaTable t;
  t.base = n;
  t.g1.resize(static_cast<size_t>(space.depth()) + 1);
  t.g2.resize(static_cast<size_t>(space.depth()) + 1);
  std::vector<double> s_prev(static_cast<size_t>(space.num_atoms(n)), 0.0);
  for (int m = n + 1; m <= space.depth(); ++m) {
    const int count = space.num_atoms(m);
    std::vector<double> s(static_cast<size_t>(count));
    auto& g1 = t.g1[static_cast<size_t>(m)];
    auto& g2 = t.g2[static_cast<size_t>(m)];
    g1.assign(static_cast<size_t>(count), 0.0);
    g2.assign(static_cast<size_t>(count), 0.0);
    for (int b = 0; b < count; ++b) {
      const Atom& at = space.atom(m, b);
      const int base = space.atom_of(n, at.leaf_begin);
      const Eigen::MatrixXd h = ctx.pair().hat_inv(n, base);
      s[static_cast<size_t>(b)] = s_prev[static_cast<size_t>(at.parent)] + (h * ctx.g().diff(m).col(b)).squaredNorm();
      if (!ctx.live(n, base)) continue;
      const double den = ctx.den(n, base);
      g1[static_cast<size_t>(b)] = std::sqrt(s[static_cast<size_t>(b)]) / den;
      g2[static_cast<size_t>(b)] = (h * ctx.g().level(m).col(b)).norm() / den;
    }
    s_prev = std::move(s);
  }
  return t;
}

double default_cgamma() { return 8.0 * std::sqrt(std::numbers::e); }

double k_iteration(double c) {
  const double m = std::max(1.0, c);
  return c * c + 2.0 * m * m + 2.0;
}

double k_domination(double c) { return std::sqrt(1.0 + k_iteration(c)); }

HalvingResult halving_check(const PrincipalContext& ctx, int n, double cgamma, const std::vector<int>& atoms) {
  const FilteredSpace& space = ctx.space();
  HalvingResult r;
  if (atoms.empty()) return r;
  if (n == space.depth()) {
    // No m > n: the supremum is over an empty set and never exceeds C.
    for (int a : atoms) r.below += space.atom(n, a).prob;
    return r;
  }
  const GammaTable t = gamma_table(ctx, n);
  for (int a : atoms) {
    if (a < 0 || a >= space.num_atoms(n)) throw ValidationError("halving_check: atom out of range");
    const Atom& at = space.atom(n, a);
    for (int l = at.leaf_begin; l < at.leaf_end; ++l) {
      double sup = 0.0;
      for (int m = n + 1; m <= space.depth(); ++m) sup = std::max(sup, t.gamma(space, m, l));
      (sup > cgamma ? r.above : r.below) += space.leaf_prob(l);
    }
  }
  return r;
}

std::vector<HalvingResult> halving_by_atom(const PrincipalContext& ctx, int n, double cgamma) {
  const FilteredSpace& space = ctx.space();
  std::vector<HalvingResult> out(static_cast<size_t>(space.num_atoms(n)));
  if (n == space.depth()) {
    for (int a = 0; a < space.num_atoms(n); ++a) out[static_cast<size_t>(a)].below = space.atom(n, a).prob;
    return out;
  }
  // sup_m gamma per atom, carried down level by level.
  const GammaTable t = gamma_table(ctx, n);
  std::vector<double> sup(static_cast<size_t>(space.num_atoms(n)), 0.0);
  for (int m = n + 1; m <= space.depth(); ++m) {
    std::vector<double> next(static_cast<size_t>(space.num_atoms(m)));
    for (int b = 0; b < space.num_atoms(m); ++b) {
      const size_t ub = static_cast<size_t>(b);
      const double up = m == n + 1 ? 0.0 : sup[static_cast<size_t>(space.atom(m, b).parent)];
      next[ub] = std::max({up, t.g1[static_cast<size_t>(m)][ub], t.g2[static_cast<size_t>(m)][ub]});
    }
    sup = std::move(next);
  }
  for (int l = 0; l < space.num_leaves(); ++l) {
    HalvingResult& r = out[static_cast<size_t>(space.atom_of(n, l))];
    (sup[static_cast<size_t>(l)] > cgamma ? r.above : r.below) += space.leaf_prob(l);
  }
  return out;
}

SparseFamily PrincipalFamily::to_sparse() const {
  SparseFamily out;
  for (const PrincipalSet& s : sets) out.sets.push_back({s.generation, s.kappa1, s.kappa2, s.atoms});
  return out;
}

PrincipalFamily build_principal_family(const PrincipalContext& ctx, double cgamma) {
  const FilteredSpace& space = ctx.space();
  if (!std::isfinite(cgamma) || cgamma < 0.0) throw ValidationError("build_principal_family: C_gamma must be >= 0");
  PrincipalFamily fam;
  fam.cgamma = cgamma;
  fam.convention = ctx.convention();
  fam.tau1.assign(static_cast<size_t>(space.num_leaves()), kNever);

  auto group = [&](const std::vector<Stop>& stops) {
    std::map<int, std::vector<int>> by_level;
    for (const Stop& s : stops) by_level[s.level].push_back(s.atom);
    for (auto& [j, atoms] : by_level) std::sort(atoms.begin(), atoms.end());
    return by_level;
  };

  std::vector<int> current;
  for (auto& [j, atoms] : group(stopping_walk(ctx, 0, 0, kFirstGenThreshold))) {
    PrincipalSet s;
    s.generation = 1;
    s.kappa1 = 0;
    s.kappa2 = j;
    s.atoms = atoms;
    s.leaves = leaves_of(space, j, atoms);
    for (int l : s.leaves) fam.tau1[static_cast<size_t>(l)] = j;
    current.push_back(static_cast<int>(fam.sets.size()));
    fam.sets.push_back(std::move(s));
  }

  while (!current.empty()) {
    fam.generations.push_back(current);
    std::vector<int> next;
    for (int idx : current) {
      std::vector<Stop> stops;
      {
        const PrincipalSet& p = fam.sets[static_cast<size_t>(idx)];
        for (int a : p.atoms) {
          auto st = stopping_walk(ctx, p.kappa2, a, cgamma);
          stops.insert(stops.end(), st.begin(), st.end());
        }
      }
      PrincipalSet& p = fam.sets[static_cast<size_t>(idx)];
      p.tau.assign(p.leaves.size(), kNever);
      for (const Stop& s : stops) {
        const Atom& at = space.atom(s.level, s.atom);
        for (int l = at.leaf_begin; l < at.leaf_end; ++l) {
          const auto pos = std::lower_bound(p.leaves.begin(), p.leaves.end(), l) - p.leaves.begin();
          p.tau[static_cast<size_t>(pos)] = s.level;
        }
      }
      for (size_t i = 0; i < p.leaves.size(); ++i)
        if (p.tau[i] == kNever) p.escape.push_back(p.leaves[i]);
      const int generation = p.generation;
      const int kappa = p.kappa2;
      for (auto& [j, atoms] : group(stops)) {
        PrincipalSet child;
        child.generation = generation + 1;
        child.kappa1 = kappa;
        child.kappa2 = j;
        child.parent = idx;
        child.atoms = atoms;
        child.leaves = leaves_of(space, j, atoms);
        next.push_back(static_cast<int>(fam.sets.size()));
        fam.sets.push_back(std::move(child));
      }
    }
    current = std::move(next);
  }
  return fam;
}

PropertyReport check_properties(const PrincipalFamily& family, const PrincipalContext& ctx, double tol) {
  const FilteredSpace& space = ctx.space();
  const int n_leaves = space.num_leaves();
  const double c = family.cgamma;
  const double scale = ctx.scale();
  const Martingale& g = ctx.g();
  PropertyReport rep;

  // (a)
  std::vector<int> count(static_cast<size_t>(n_leaves), 0);
  for (const PrincipalSet& s : family.sets)
    for (int l : s.escape)
      if (++count[static_cast<size_t>(l)] > 1) rep.a = false;

  // (f): generation N is empty for N > D.
  rep.f = family.num_generations() <= space.depth();

  std::vector<char> member(static_cast<size_t>(n_leaves), 0);
  std::vector<char> in_escape(static_cast<size_t>(n_leaves), 0);
  for (size_t idx = 0; idx < family.sets.size(); ++idx) {
    const PrincipalSet& s = family.sets[idx];
    SetProperties sp;
    sp.index = static_cast<int>(idx);
    const bool later = s.generation >= 2;
    for (int l : s.leaves) member[static_cast<size_t>(l)] = 1;
    for (int l : s.escape) in_escape[static_cast<size_t>(l)] = 1;

    // (b): the leaf set is a union of level-kappa2 atoms, and matches the atom list.
    if (s.kappa2 < 0 || s.kappa2 > space.depth() || s.kappa1 >= s.kappa2) {
      sp.b = false;
    } else {
      for (int l : s.leaves) {
        const Atom& at = space.atom(s.kappa2, space.atom_of(s.kappa2, l));
        for (int x = at.leaf_begin; x < at.leaf_end && sp.b; ++x)
          if (!member[static_cast<size_t>(x)]) sp.b = false;
      }
      std::vector<int> listed;
      for (int a : s.atoms) {
        if (a < 0 || a >= space.num_atoms(s.kappa2)) {
          sp.b = false;
          break;
        }
        for (int l = space.atom(s.kappa2, a).leaf_begin; l < space.atom(s.kappa2, a).leaf_end; ++l) listed.push_back(l);
      }
      std::sort(listed.begin(), listed.end());
      if (listed != s.leaves) sp.b = false;
    }

    if (sp.b) {
      // (c) on P, base kappa1.
      for (int l : s.leaves) {
        const int a1 = space.atom_of(s.kappa1, l);
        const Eigen::MatrixXd h = ctx.pair().hat_inv(s.kappa1, a1);
        const double rhs = c * ctx.den(s.kappa1, a1);
        double sum = 0.0, sup = 0.0;
        for (int i = s.kappa1 + 1; i <= s.kappa2 - 1; ++i) {
          sum += (h * g.diff(i).col(space.atom_of(i, l))).squaredNorm();
          sup = std::max(sup, (h * g.level(i).col(space.atom_of(i, l))).norm());
        }
        const double lhs = std::max(std::sqrt(sum), sup);
        if (rhs > 0.0) sp.c_ratio = std::max(sp.c_ratio, lhs / rhs);
        if (!le_slack(lhs, rhs, tol, scale) && later) sp.c = false;
      }
      // (d) on E(P), base kappa2.
      for (int l : s.escape) {
        const int a2 = space.atom_of(s.kappa2, l);
        const Eigen::MatrixXd h = ctx.pair().hat_inv(s.kappa2, a2);
        const double rhs = c * ctx.den(s.kappa2, a2);
        double sum = 0.0, sup = 0.0;
        for (int i = s.kappa2 + 1; i <= space.depth(); ++i) {
          sum += (h * g.diff(i).col(space.atom_of(i, l))).squaredNorm();
          sup = std::max(sup, (h * g.level(i).col(space.atom_of(i, l))).norm());
        }
        const double lhs = std::max(std::sqrt(sum), sup);
        if (rhs > 0.0) sp.d_ratio = std::max(sp.d_ratio, lhs / rhs);
        if (!le_slack(lhs, rhs, tol, scale) && later) sp.d = false;
      }
      // (e) masses, globally and per kappa2-atom.
      double mass_p = 0.0, mass_e = 0.0;
      for (int l : s.leaves) mass_p += space.leaf_prob(l);
      for (int l : s.escape) mass_e += space.leaf_prob(l);
      sp.e_ratio = mass_e > 0.0 ? mass_p / mass_e : std::numeric_limits<double>::infinity();
      bool e_ok = mass_p <= 2.0 * mass_e * (1.0 + tol);
      for (int a : s.atoms) {
        const Atom& at = space.atom(s.kappa2, a);
        double in_e = 0.0;
        for (int l = at.leaf_begin; l < at.leaf_end; ++l)
          if (in_escape[static_cast<size_t>(l)]) in_e += space.leaf_prob(l);
        sp.e_ratio = std::max(sp.e_ratio, in_e > 0.0 ? at.prob / in_e : std::numeric_limits<double>::infinity());
        if (!(at.prob <= 2.0 * in_e * (1.0 + tol))) e_ok = false;
      }
      if (later) sp.e = e_ok;
    } else {
      sp.c = sp.d = sp.e = false;
    }

    if (later) {
      rep.c_worst = std::max(rep.c_worst, sp.c_ratio);
      rep.d_worst = std::max(rep.d_worst, sp.d_ratio);
      rep.e_worst = std::max(rep.e_worst, sp.e_ratio);
    } else {
      rep.c_gen1 = std::max(rep.c_gen1, sp.c_ratio);
      rep.d_gen1 = std::max(rep.d_gen1, sp.d_ratio);
      rep.e_gen1 = std::max(rep.e_gen1, sp.e_ratio);
    }
    rep.b = rep.b && sp.b;
    rep.c = rep.c && sp.c;
    rep.d = rep.d && sp.d;
    rep.e = rep.e && sp.e;
    for (int l : s.leaves) member[static_cast<size_t>(l)] = 0;
    for (int l : s.escape) in_escape[static_cast<size_t>(l)] = 0;
    rep.sets.push_back(sp);
  }

  // Nesting and disjointness: within a generation every leaf is covered at most once, each
  // set lies in its parent with kappa1 = kappa2(parent), and the children of a parent
  // partition {tau_parent < infinity}.
  for (int m = 0; m < family.num_generations(); ++m) {
    std::vector<int> cover(static_cast<size_t>(n_leaves), 0);
    for (int idx : family.generations[static_cast<size_t>(m)]) {
      const PrincipalSet& s = family.sets[static_cast<size_t>(idx)];
      if (s.generation != m + 1) rep.nesting = false;
      for (int l : s.leaves)
        if (++cover[static_cast<size_t>(l)] > 1) rep.sibling_disjoint = false;
    }
  }
  std::vector<std::vector<int>> children(family.sets.size());
  for (size_t idx = 0; idx < family.sets.size(); ++idx) {
    const PrincipalSet& s = family.sets[idx];
    if (s.generation == 1) {
      if (s.parent != -1 || s.kappa1 != 0) rep.nesting = false;
      continue;
    }
    if (s.parent < 0 || s.parent >= static_cast<int>(family.sets.size())) {
      rep.nesting = false;
      continue;
    }
    const PrincipalSet& par = family.sets[static_cast<size_t>(s.parent)];
    if (par.generation != s.generation - 1 || par.kappa2 != s.kappa1) rep.nesting = false;
    children[static_cast<size_t>(s.parent)].push_back(static_cast<int>(idx));
  }
  for (size_t idx = 0; idx < family.sets.size(); ++idx) {
    const PrincipalSet& par = family.sets[idx];
    std::vector<int> stopped;
    for (size_t i = 0; i < par.leaves.size() && i < par.tau.size(); ++i)
      if (par.tau[i] != kNever) stopped.push_back(par.leaves[i]);
    std::vector<int> union_children;
    for (int ci : children[idx]) {
      const auto& cl = family.sets[static_cast<size_t>(ci)].leaves;
      union_children.insert(union_children.end(), cl.begin(), cl.end());
    }
    std::sort(union_children.begin(), union_children.end());
    if (union_children != stopped) rep.nesting = false;
  }
  return rep;
}

LeafFunction b_sequence(const PrincipalFamily& family, const PrincipalContext& ctx, int m) {
  const FilteredSpace& space = ctx.space();
  if (m < 1) throw ValidationError("b_sequence: m must be >= 1");
  LeafFunction out = LeafFunction::zeros(1, space.num_leaves());
  if (m > family.num_generations()) return out;
  for (int idx : family.generations[static_cast<size_t>(m) - 1]) {
    const PrincipalSet& s = family.sets[static_cast<size_t>(idx)];
    for (int l : s.leaves) {
      const Eigen::MatrixXd wp = ctx.ws().w_pos(l);
      double acc = 0.0;
      for (int k = s.kappa2 + 1; k <= space.depth(); ++k)
        acc += (wp * ctx.g().diff(k).col(space.atom_of(k, l))).squaredNorm();
      out.values(0, l) += acc;
    }
  }
  out.values = out.values.cwiseSqrt();
  return out;
}

LeafFunction generation_mass(const PrincipalFamily& family, const PrincipalContext& ctx, int m) {
  const FilteredSpace& space = ctx.space();
  LeafFunction out = LeafFunction::zeros(1, space.num_leaves());
  if (m < 1 || m > family.num_generations()) return out;
  for (int idx : family.generations[static_cast<size_t>(m) - 1]) {
    const PrincipalSet& s = family.sets[static_cast<size_t>(idx)];
    for (int l : s.leaves) {
      const int a = space.atom_of(s.kappa2, l);
      const double e = ctx.den(s.kappa2, a);
      const double nrm = spectral_norm(ctx.ws().w_pos(l) * ctx.pair().hat(s.kappa2, a));
      out.values(0, l) += nrm * nrm * e * e;
    }
  }
  return out;
}

IterationReport iteration_check(const PrincipalFamily& family, const PrincipalContext& ctx, double tol) {
  const FilteredSpace& space = ctx.space();
  const double c = family.cgamma;
  const double step_a = c * c + 2.0 * std::max(1.0, c) * std::max(1.0, c);
  IterationReport rep;
  rep.k_it = k_iteration(c);
  const int gens = family.num_generations();
  std::vector<Eigen::RowVectorXd> b2, am;
  for (int m = 1; m <= gens + 1; ++m) {
    b2.push_back(b_sequence(family, ctx, m).values.row(0).array().square().matrix());
    am.push_back(generation_mass(family, ctx, m).values.row(0));
  }
  rep.tail_zero = (b2.back().array() == 0.0).all() && (b_sequence(family, ctx, space.depth() + 1).values.array() == 0.0).all();
  for (int l = 0; l < space.num_leaves(); ++l) {
    for (int m = 0; m < gens; ++m) {
      const double rhs_extra = step_a * am[static_cast<size_t>(m)](l) + 2.0 * am[static_cast<size_t>(m) + 1](l);
      const double lhs = b2[static_cast<size_t>(m)](l) - b2[static_cast<size_t>(m) + 1](l);
      if (rhs_extra > 0.0) rep.worst_step_ratio = std::max(rep.worst_step_ratio, lhs / rhs_extra);
      if (lhs > rhs_extra * (1.0 + tol)) rep.one_step = false;
    }
    double cumulative = 0.0;
    for (int n = 1; n <= gens + 1; ++n) {
      cumulative += am[static_cast<size_t>(n) - 1](l);
      const double rhs = rep.k_it * cumulative;
      const double lhs = b2[0](l) - b2[static_cast<size_t>(n) - 1](l);
      if (rhs > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, lhs / rhs);
      if (lhs > rhs * (1.0 + tol)) rep.iterated = false;
    }
  }
  return rep;
}

VanishReport vanish_checks(const PrincipalFamily& family, const PrincipalContext& ctx, double tol) {
  const FilteredSpace& space = ctx.space();
  const LeafFunction sw = weighted_square_fn(ctx.ws(), ctx.f(), ctx.convention());
  const double top = std::max(1.0, sw.values.maxCoeff());
  VanishReport rep;
  rep.tol = tol * top;
  for (int l = 0; l < space.num_leaves(); ++l)
    if (family.tau1[static_cast<size_t>(l)] == kNever) rep.tau_inf_max = std::max(rep.tau_inf_max, sw.values(0, l));
  for (int idx : family.generations.empty() ? std::vector<int>{} : family.generations[0]) {
    const PrincipalSet& s = family.sets[static_cast<size_t>(idx)];
    for (int l : s.leaves) {
      const Eigen::MatrixXd wp = ctx.ws().w_pos(l);
      double acc = 0.0;
      for (int i = 1; i < s.kappa2; ++i) acc += (wp * ctx.g().diff(i).col(space.atom_of(i, l))).squaredNorm();
      // Compare the root of the squared sum so both checks share one scale.
      rep.pre_kappa_max = std::max(rep.pre_kappa_max, std::sqrt(acc));
    }
  }
  return rep;
}

DominationReport sparse_domination_check(const PrincipalFamily& family, const PrincipalContext& ctx) {
  const FilteredSpace& space = ctx.space();
  const LeafFunction s = weighted_square_fn(ctx.ws(), ctx.f(), family.convention);
  const LeafFunction t = sparse_op_matrix(ctx.ws(), ctx.pair(), family.to_sparse(), 2.0, ctx.f());
  DominationReport rep;
  rep.bound = k_domination(family.cgamma);
  const double mag = std::max({s.values.maxCoeff(), t.values.maxCoeff(), 1e-300});
  for (int l = 0; l < space.num_leaves(); ++l) {
    const double sv = s.values(0, l);
    const double tv = t.values(0, l);
    if (tv <= 1e-14 * mag) {
      if (sv > 1e-10 * mag) rep.zero_violation = true;
      continue;
    }
    rep.max_ratio = std::max(rep.max_ratio, sv / tv);
  }
  return rep;
}

}  // namespace wml
