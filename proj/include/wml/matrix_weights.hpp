#pragma once

#include "wml/core.hpp"
#include "wml/filtration.hpp"
#include "wml/reducing.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

namespace wml {

/// One SPD d x d matrix per leaf.
class MatrixWeight {
 public:
  /// Validates symmetry and positivity. With `clip`, eigenvalues below 1e-10 of the
  /// leaf's largest are raised to that floor and counted in clipped().
  MatrixWeight(int dim, std::vector<Mat> leaves, bool clip = true);
  static MatrixWeight scalar(const std::vector<double>& w);
  static MatrixWeight constant(int leaves, const Mat& m);
  static MatrixWeight identity(int dim, int leaves) { return constant(leaves, Mat::Identity(dim, dim)); }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(leaves_.size()); }
  const Mat& at(int leaf) const { return leaves_[static_cast<size_t>(leaf)]; }
  int clipped() const { return clipped_; }

  MatrixWeight scaled(double c) const;
  /// Leafwise W^alpha.
  MatrixWeight power(double alpha) const;

 private:
  int dim_;
  std::vector<Mat> leaves_;
  int clipped_ = 0;
};

/// A filtered space with a weight and exponent, caching W^{1/p} and W^{-1/p}.
class WeightedSpace {
 public:
  WeightedSpace(std::shared_ptr<const FilteredSpace> space, MatrixWeight w, double p);

  const FilteredSpace& space() const { return *space_; }
  std::shared_ptr<const FilteredSpace> space_ptr() const { return space_; }
  const MatrixWeight& weight() const { return w_; }
  double p() const { return p_; }
  double p_conj() const { return conjugate_exponent(p_); }
  int dim() const { return w_.dim(); }
  const Mat& w_pos(int leaf) const { return pos_[static_cast<size_t>(leaf)]; }
  const Mat& w_neg(int leaf) const { return neg_[static_cast<size_t>(leaf)]; }

  /// W^{1/p} f and W^{-1/p} f, leafwise.
  LeafFunction apply_pos(const LeafFunction& f) const;
  LeafFunction apply_neg(const LeafFunction& f) const;

 private:
  std::shared_ptr<const FilteredSpace> space_;
  MatrixWeight w_;
  double p_;
  std::vector<Mat> pos_;
  std::vector<Mat> neg_;
};

struct ReducerOptions {
  double tol = 1e-3;
  bool exact_p2 = false;  // p = 2 only: use (E_n W)^{1/2} and (E_n W^{-1})^{1/2}
  int max_iter = 100000;
  std::uint64_t seed = 0x5eedULL;  // d >= 4 direction sampling
};

/// Tilde and hat reducers per level and atom.
class ReducingPair {
 public:
  ReducingPair() = default;
  ReducingPair(double p, double tol, std::vector<std::vector<Mat>> tilde, std::vector<std::vector<Mat>> hat);

  double p() const { return p_; }
  double tol() const { return tol_; }
  int depth() const { return static_cast<int>(tilde_.size()) - 1; }
  const Mat& tilde(int n, int atom) const { return tilde_.at(static_cast<size_t>(n)).at(static_cast<size_t>(atom)); }
  const Mat& hat(int n, int atom) const { return hat_.at(static_cast<size_t>(n)).at(static_cast<size_t>(atom)); }
  const Mat& hat_inv(int n, int atom) const { return hat_inv_.at(static_cast<size_t>(n)).at(static_cast<size_t>(atom)); }
  const std::vector<Mat>& tilde_level(int n) const { return tilde_.at(static_cast<size_t>(n)); }
  const std::vector<Mat>& hat_level(int n) const { return hat_.at(static_cast<size_t>(n)); }

  /// The dual pair: tilde and hat swapped, exponent p'.
  ReducingPair exchanged() const;

 private:
  double p_ = 2.0;
  double tol_ = 0.0;
  std::vector<std::vector<Mat>> tilde_, hat_, hat_inv_;
};

struct LevelReducers {
  std::vector<Mat> tilde;
  std::vector<Mat> hat;
};

/// Reducers at a single level n.
LevelReducers reduce_pair(const WeightedSpace& ws, int n, const ReducerOptions& opts = {});
/// Reducers at every level 0..D.
ReducingPair reduce_all(const WeightedSpace& ws, const ReducerOptions& opts = {});

/// Reducers of rho(e) = (E_n ||M e||^q)^{1/q} for leafwise matrices M, at every level.
std::vector<std::vector<Mat>> reduce_norms(const FilteredSpace& space, const std::vector<Mat>& leaf_mats, double q,
                                           const ReducerOptions& opts = {});

struct ReducingBoundsReport {
  double tilde_max = 0;     // max over atoms of E_n ||W^{1/p} tilde^-1||^p
  double hat_max = 0;       // max over atoms of E_n ||W^{-1/p} hat^-1||^{p'}
  double tilde_bound = 0;   // d^{p/2} (1+tol)^p
  double hat_bound = 0;     // d^{p'/2} (1+tol)^{p'}
  std::vector<std::vector<double>> tilde_by_atom, hat_by_atom;
  bool within_bounds() const { return tilde_max <= tilde_bound && hat_max <= hat_bound; }
};

ReducingBoundsReport verify_reducing_bounds(const WeightedSpace& ws, const ReducingPair& pair);

struct CertificationReport {
  double upper_max = 0;                                            // max ||A e|| / rho(e)
  double lower_min = std::numeric_limits<double>::infinity();      // min ||A e|| / rho(e)
  int atoms_checked = 0;
  bool within(double tol, int d) const;
};

/// Held-out check of every reducer of `pair` on `count` random directions per atom.
CertificationReport certify_reducers(const WeightedSpace& ws, const ReducingPair& pair, int count,
                                     std::uint64_t seed);

/// Max over atoms of min/max of ||A e|| / ||B e|| on random directions: equivalence of two reducer sets.
SandwichRatios compare_reducers(const std::vector<std::vector<Mat>>& a, const std::vector<std::vector<Mat>>& b,
                                int count, std::uint64_t seed);

double ap_characteristic(const ReducingPair& pair);
double ap_characteristic(const WeightedSpace& ws, const ReducerOptions& opts = {});

/// A_1 characteristic with tilde built from rho(e) = E_n ||W e||.
double a1_characteristic(const FilteredSpace& space, const MatrixWeight& w, const ReducerOptions& opts = {});

struct DualWeight {
  MatrixWeight v;
  double p_dual;
};

DualWeight dual_weight(const MatrixWeight& w, double p);

struct ApEquivalents {
  double q1 = 0;  // sup_n E_n ||hat_n W^{1/p}||^p
  double q2 = 0;  // (sup_n E_n ||tilde_n W^{-1/p}||^{p'})^{p/p'}
};

ApEquivalents ap_equivalents(const WeightedSpace& ws, const ReducingPair& pair);

/// Contract constant for ap_equivalents ratios: 16 d^{max(p,p')/2}.
double ap_equivalence_constant(double p, int d);

}  // namespace wml
