#pragma once

#include "wml/filtration.hpp"
#include "wml/matrix_weights.hpp"
#include "wml/operators.hpp"

#include <climits>
#include <vector>

namespace wml {

inline constexpr int kNever = INT_MAX;  // tau = infinity

/// Shared precomputation for the stopping-time machinery: the martingale of
/// g = W^{-1/p} f and the denominators E_n ||hat_n^{-1} g||. Holds references;
/// `ws` and `pair` must outlive it.
class PrincipalContext {
 public:
  PrincipalContext(const WeightedSpace& ws, const ReducingPair& pair, const LeafFunction& f,
                   DiffConvention conv = DiffConvention::kFoldMean);

  const WeightedSpace& ws() const { return ws_; }
  const FilteredSpace& space() const { return ws_.space(); }
  const ReducingPair& pair() const { return pair_; }
  const LeafFunction& f() const { return f_; }
  const Martingale& g() const { return g_; }
  DiffConvention convention() const { return g_.convention(); }
  double den(int n, int atom) const { return den_[static_cast<size_t>(n)][static_cast<size_t>(atom)]; }
  /// Denominators at or below this floor count as zero.
  double zero_floor() const { return zero_floor_; }
  bool live(int n, int atom) const { return den(n, atom) > zero_floor_; }
  /// Instance scale used for absolute slack in inequality checks.
  double scale() const { return scale_; }

 private:
  const WeightedSpace& ws_;
  const ReducingPair& pair_;
  LeafFunction f_;
  Martingale g_;
  std::vector<std::vector<double>> den_;
  double zero_floor_ = 0;
  double scale_ = 0;
};

/// gamma_1, gamma_2 for a base level n. For m > n both are constant on level-m atoms
/// and are stored per atom; for m <= n they vanish.
struct GammaTable {
  int base = 0;
  std::vector<std::vector<double>> g1, g2;  // [m][level-m atom]

  double gamma1(const FilteredSpace& s, int m, int leaf) const { return at(g1, s, m, leaf); }
  double gamma2(const FilteredSpace& s, int m, int leaf) const { return at(g2, s, m, leaf); }
  double gamma(const FilteredSpace& s, int m, int leaf) const { return std::max(gamma1(s, m, leaf), gamma2(s, m, leaf)); }

 private:
  double at(const std::vector<std::vector<double>>& t, const FilteredSpace& s, int m, int leaf) const {
    if (m <= base) return 0.0;
    return t[static_cast<size_t>(m)][static_cast<size_t>(s.atom_of(m, leaf))];
  }
};

GammaTable gamma_table(const PrincipalContext& ctx, int n);

/// 8 sqrt(e).
double default_cgamma();
/// Iteration constant C^2 + 2 max(1, C)^2 + 2.
double k_iteration(double cgamma);
/// Domination constant sqrt(1 + K_it).
double k_domination(double cgamma);

struct HalvingResult {
  double above = 0;  // P(A and sup_m gamma > C)
  double below = 0;  // P(A and sup_m gamma <= C)
  bool ok() const { return above <= below; }
};

/// `atoms` are level-n atoms forming A.
HalvingResult halving_check(const PrincipalContext& ctx, int n, double cgamma, const std::vector<int>& atoms);

/// halving_check for every level-n atom on its own.
std::vector<HalvingResult> halving_by_atom(const PrincipalContext& ctx, int n, double cgamma);

struct PrincipalSet {
  int generation = 1;
  int kappa1 = 0;
  int kappa2 = 0;
  int parent = -1;           // index of the generating set, -1 in generation 1
  std::vector<int> atoms;    // level-kappa2 atoms
  std::vector<int> leaves;   // sorted
  std::vector<int> tau;      // tau_P per entry of `leaves`, kNever for infinity
  std::vector<int> escape;   // E(P), sorted leaves
};

struct PrincipalFamily {
  double cgamma = 0;
  DiffConvention convention = DiffConvention::kFoldMean;
  std::vector<PrincipalSet> sets;
  std::vector<std::vector<int>> generations;  // indices into `sets`
  std::vector<int> tau1;                       // per leaf

  int num_generations() const { return static_cast<int>(generations.size()); }
  SparseFamily to_sparse() const;
};

PrincipalFamily build_principal_family(const PrincipalContext& ctx, double cgamma);

struct SetProperties {
  int index = 0;
  bool b = true, c = true, d = true, e = true;
  double c_ratio = 0;  // max over both (c) inequalities of lhs / rhs
  double d_ratio = 0;
  double e_ratio = 0;  // max of P(P) / P(E(P)) and chi_P / E_{kappa2} chi_E
};

struct PropertyReport {
  bool a = true, b = true, c = true, d = true, e = true, f = true;
  bool nesting = true;
  bool sibling_disjoint = true;
  double c_worst = 0, d_worst = 0, e_worst = 0;
  double c_gen1 = 0, d_gen1 = 0, e_gen1 = 0;  // informational
  std::vector<SetProperties> sets;
  bool all() const { return a && b && c && d && e && f && nesting && sibling_disjoint; }
};

PropertyReport check_properties(const PrincipalFamily& family, const PrincipalContext& ctx, double tol = 1e-10);

/// b_m per leaf; zero when generation m is empty.
LeafFunction b_sequence(const PrincipalFamily& family, const PrincipalContext& ctx, int m);

/// A_m = sum_{P in P_m} ||W^{1/p} hat_{kappa2}||^2 (E_{kappa2} ||hat^{-1} g||)^2 chi_P, per leaf.
LeafFunction generation_mass(const PrincipalFamily& family, const PrincipalContext& ctx, int m);

struct IterationReport {
  double k_it = 0;
  double worst_ratio = 0;      // max (b_1^2 - b_N^2) / (K_it sum_m A_m)
  double worst_step_ratio = 0;
  bool one_step = true;        // b_m^2 <= b_{m+1}^2 + (C^2 + 2max(1,C)^2) A_m + 2 A_{m+1}
  bool iterated = true;
  bool tail_zero = true;       // b_m == 0 for m beyond the last generation
  bool ok() const { return one_step && iterated && tail_zero; }
};

IterationReport iteration_check(const PrincipalFamily& family, const PrincipalContext& ctx, double tol = 1e-10);

struct VanishReport {
  double tau_inf_max = 0;   // max S_W f on {tau_1 = infinity}
  double pre_kappa_max = 0; // max sum_{i < kappa2} ||W^{1/p} d_i g||^2 on P_1
  double tol = 0;
  bool ok() const { return tau_inf_max <= tol && pre_kappa_max <= tol; }
};

VanishReport vanish_checks(const PrincipalFamily& family, const PrincipalContext& ctx, double tol = 1e-10);

struct DominationReport {
  double max_ratio = 0;
  double bound = 0;   // K_dom
  bool zero_violation = false;
  bool pass() const { return !zero_violation && max_ratio <= bound; }
};

DominationReport sparse_domination_check(const PrincipalFamily& family, const PrincipalContext& ctx);

}  // namespace wml
