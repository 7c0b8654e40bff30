#pragma once

#include "wml/core.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace wml {

/// Recursive description of a filtration tree. `mass` is the absolute probability of the node.
struct TreeSpec {
  double mass = 1.0;
  std::vector<TreeSpec> children;
};

struct Atom {
  double prob = 0.0;
  int parent = -1;       // index into the previous level, -1 at level 0
  int child_begin = 0;   // children occupy [child_begin, child_end) of the next level
  int child_end = 0;
  int leaf_begin = 0;    // leaves occupy [leaf_begin, leaf_end)
  int leaf_end = 0;
  int leaf_count() const { return leaf_end - leaf_begin; }
};

/// A finite filtration: levels 0..D of refining partitions. Leaves are the level-D atoms,
/// numbered so that every atom covers a contiguous leaf range.
class FilteredSpace {
 public:
  static FilteredSpace dyadic(int depth, std::optional<std::vector<double>> leaf_probs = std::nullopt);
  static FilteredSpace from_tree(const TreeSpec& root);

  int depth() const { return static_cast<int>(levels_.size()) - 1; }
  int num_leaves() const { return static_cast<int>(levels_.back().size()); }
  int num_atoms(int n) const { return static_cast<int>(level(n).size()); }
  std::span<const Atom> level(int n) const;
  const Atom& atom(int n, int a) const { return level(n)[static_cast<size_t>(a)]; }
  /// Index of the level-n atom containing `leaf`.
  int atom_of(int n, int leaf) const { return leaf_to_atom_[static_cast<size_t>(n)][static_cast<size_t>(leaf)]; }
  std::span<const int> atom_map(int n) const { return leaf_to_atom_.at(static_cast<size_t>(n)); }
  double leaf_prob(int leaf) const { return levels_.back()[static_cast<size_t>(leaf)].prob; }

  /// Rebuilds the recursive description (masses are absolute probabilities).
  TreeSpec to_tree() const;

 private:
  FilteredSpace() = default;
  void finalize();

  std::vector<std::vector<Atom>> levels_;
  std::vector<std::vector<int>> leaf_to_atom_;
};

/// A d-vector per leaf, stored as a d x N matrix (column = leaf).
struct LeafFunction {
  Eigen::MatrixXd values;

  LeafFunction() = default;
  explicit LeafFunction(Eigen::MatrixXd v) : values(std::move(v)) {}
  static LeafFunction zeros(int dim, int leaves) { return LeafFunction(Eigen::MatrixXd::Zero(dim, leaves)); }
  static LeafFunction scalar(const std::vector<double>& v);
  int dim() const { return static_cast<int>(values.rows()); }
  int size() const { return static_cast<int>(values.cols()); }
  auto at(int leaf) const { return values.col(leaf); }
  auto at(int leaf) { return values.col(leaf); }
};

/// A d-vector per atom of one level (column = atom).
using LevelFunction = Eigen::MatrixXd;

/// How the first difference treats the level-0 mean.
enum class DiffConvention {
  kCentered,  // d_1 = f_1 - f_0; the mean is not a difference term
  kFoldMean,  // d_1 = f_1, i.e. f_0 := 0 when differencing
};

class Martingale {
 public:
  Martingale(const FilteredSpace& space, const LeafFunction& f, DiffConvention conv = DiffConvention::kCentered);

  int depth() const { return static_cast<int>(levels_.size()) - 1; }
  int dim() const { return static_cast<int>(levels_.front().rows()); }
  DiffConvention convention() const { return conv_; }
  /// f_n on level-n atoms.
  const LevelFunction& level(int n) const { return levels_.at(static_cast<size_t>(n)); }
  /// d_k on level-k atoms, k = 1..D.
  const LevelFunction& diff(int k) const { return diffs_.at(static_cast<size_t>(k)); }
  /// Value of d_k at a leaf.
  Eigen::VectorXd diff_at(const FilteredSpace& space, int k, int leaf) const {
    return diffs_[static_cast<size_t>(k)].col(space.atom_of(k, leaf));
  }
  Eigen::VectorXd level_at(const FilteredSpace& space, int n, int leaf) const {
    return levels_[static_cast<size_t>(n)].col(space.atom_of(n, leaf));
  }

 private:
  DiffConvention conv_;
  std::vector<LevelFunction> levels_;
  std::vector<LevelFunction> diffs_;  // index 0 unused (empty)
};

LevelFunction cond_expect(const FilteredSpace& space, const LeafFunction& f, int n);
/// Lifts a level-n function to the leaves.
LeafFunction lift(const FilteredSpace& space, const LevelFunction& g, int n);
Martingale martingale_of(const FilteredSpace& space, const LeafFunction& f,
                         DiffConvention conv = DiffConvention::kCentered);
double lp_norm(const FilteredSpace& space, const LeafFunction& f, double p);

}  // namespace wml
