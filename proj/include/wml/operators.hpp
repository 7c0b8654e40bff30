#pragma once

#include "wml/filtration.hpp"
#include "wml/matrix_weights.hpp"

#include <vector>

namespace wml {

struct SparseSet {
  int generation = 1;
  int kappa1 = -1;
  int kappa2 = 0;
  std::vector<int> atoms;  // level-kappa2 atoms whose union is the set
};

struct SparseFamily {
  std::vector<SparseSet> sets;
};

/// Per leaf (sum_{k=1..D} ||d_k||^2)^{1/2}.
LeafFunction square_fn(const FilteredSpace& space, const Martingale& mart);

/// Per leaf (sum_k ||W^{1/p} d_k(W^{-1/p} f)||^2)^{1/2}.
LeafFunction weighted_square_fn(const WeightedSpace& ws, const LeafFunction& f,
                                DiffConvention conv = DiffConvention::kCentered);

/// E_n ||hat_n^{-1} W^{-1/p} f|| for every level n and atom.
std::vector<std::vector<double>> hat_averages(const WeightedSpace& ws, const ReducingPair& pair, const LeafFunction& f);

/// Per leaf max over n = 0..D of E_n ||hat_n^{-1} W^{-1/p} f||.
LeafFunction mprime_maximal(const WeightedSpace& ws, const ReducingPair& pair, const LeafFunction& f);

/// T_{W,r} f on the leaves.
LeafFunction sparse_op_matrix(const WeightedSpace& ws, const ReducingPair& pair, const SparseFamily& family, double r,
                              const LeafFunction& f);

/// Scalar T_{w,r} f = (sum_P w^{r/p} (E_{kappa2} |w^{-1/p} f|)^r chi_P)^{1/r}.
LeafFunction sparse_op_scalar(const FilteredSpace& space, const std::vector<double>& w, double p,
                              const SparseFamily& family, double r, const LeafFunction& f);

/// E_n(w f) / E_n(w) on level-n atoms.
LevelFunction weighted_cond_expect(const FilteredSpace& space, const std::vector<double>& w, const LeafFunction& f,
                                   int n);

/// (sum_l P(l) ||W^{1/p}(l) f(l)||^p)^{1/p}.
double lp_weighted_norm(const WeightedSpace& ws, const LeafFunction& f);

/// Per leaf max over n of E_n ||f||.
LeafFunction doob_maximal(const FilteredSpace& space, const LeafFunction& f);

void validate_family(const FilteredSpace& space, const SparseFamily& family);

}  // namespace wml
