#include "wml/filtration.hpp"

#include <cmath>
#include <string>

namespace wml {

namespace {

constexpr double kMassTol = 1e-12;
constexpr int kMaxDepth = 40;

void validate_tree(const TreeSpec& node, int depth) {
  if (depth > kMaxDepth) throw ValidationError("tree: depth exceeds " + std::to_string(kMaxDepth));
  if (!std::isfinite(node.mass) || !(node.mass > 0.0)) throw ValidationError("tree: masses must be positive and finite");
  if (node.children.empty()) return;
  double sum = 0.0;
  for (const auto& c : node.children) {
    validate_tree(c, depth + 1);
    sum += c.mass;
  }
  if (std::abs(sum - node.mass) > kMassTol * std::max(1.0, node.mass))
    throw ValidationError("tree: child masses do not sum to the parent mass");
}

int tree_depth(const TreeSpec& node) {
  int d = 0;
  for (const auto& c : node.children) d = std::max(d, 1 + tree_depth(c));
  return d;
}

}  // namespace

std::span<const Atom> FilteredSpace::level(int n) const {
  if (n < 0 || n > depth()) throw ValidationError("level index out of range");
  return levels_[static_cast<size_t>(n)];
}

FilteredSpace FilteredSpace::dyadic(int depth, std::optional<std::vector<double>> leaf_probs) {
  if (depth < 1 || depth > 24) throw ValidationError("dyadic: depth must be in [1, 24]");
  const size_t n_leaves = size_t{1} << depth;
  std::vector<double> probs;
  if (leaf_probs) {
    probs = std::move(*leaf_probs);
    if (probs.size() != n_leaves) throw ValidationError("dyadic: need 2^depth leaf probabilities");
    double sum = 0.0;
    for (double q : probs) {
      if (!std::isfinite(q) || !(q > 0.0)) throw ValidationError("dyadic: probabilities must be positive");
      sum += q;
    }
    if (std::abs(sum - 1.0) > kMassTol) throw ValidationError("dyadic: probabilities must sum to 1");
  } else {
    probs.assign(n_leaves, 1.0 / static_cast<double>(n_leaves));
  }

  FilteredSpace s;
  s.levels_.resize(static_cast<size_t>(depth) + 1);
  auto& leaves = s.levels_.back();
  leaves.resize(n_leaves);
  for (size_t i = 0; i < n_leaves; ++i) leaves[i].prob = probs[i];
  for (int n = depth - 1; n >= 0; --n) {
    const auto& below = s.levels_[static_cast<size_t>(n) + 1];
    auto& here = s.levels_[static_cast<size_t>(n)];
    here.resize(below.size() / 2);
    for (size_t a = 0; a < here.size(); ++a) {
      here[a].prob = below[2 * a].prob + below[2 * a + 1].prob;
      here[a].child_begin = static_cast<int>(2 * a);
      here[a].child_end = static_cast<int>(2 * a + 2);
    }
  }
  if (leaf_probs == std::nullopt) {
    for (int n = 0; n <= depth; ++n)
      for (auto& a : s.levels_[static_cast<size_t>(n)]) a.prob = std::ldexp(1.0, -n);
  }
  s.finalize();
  return s;
}

FilteredSpace FilteredSpace::from_tree(const TreeSpec& root) {
  validate_tree(root, 0);
  if (std::abs(root.mass - 1.0) > kMassTol) throw ValidationError("tree: root mass must be 1");
  const int depth = tree_depth(root);
  if (depth < 1) throw ValidationError("tree: root must have at least one child");

  FilteredSpace s;
  s.levels_.resize(static_cast<size_t>(depth) + 1);
  std::vector<const TreeSpec*> frontier{&root};
  s.levels_[0].push_back(Atom{root.mass});
  for (int n = 0; n < depth; ++n) {
    std::vector<const TreeSpec*> next;
    auto& here = s.levels_[static_cast<size_t>(n)];
    auto& below = s.levels_[static_cast<size_t>(n) + 1];
    for (size_t a = 0; a < frontier.size(); ++a) {
      const TreeSpec* node = frontier[a];
      here[a].child_begin = static_cast<int>(below.size());
      if (node->children.empty()) {
        // A node that stops splitting persists unchanged to the next level.
        below.push_back(Atom{here[a].prob, static_cast<int>(a)});
        next.push_back(node);
      } else {
        for (const auto& c : node->children) {
          below.push_back(Atom{c.mass, static_cast<int>(a)});
          next.push_back(&c);
        }
      }
      here[a].child_end = static_cast<int>(below.size());
    }
    frontier = std::move(next);
  }
  s.finalize();
  return s;
}

void FilteredSpace::finalize() {
  const int d = depth();
  auto& leaves = levels_.back();
  for (size_t i = 0; i < leaves.size(); ++i) {
    leaves[i].leaf_begin = static_cast<int>(i);
    leaves[i].leaf_end = static_cast<int>(i) + 1;
    leaves[i].child_begin = leaves[i].child_end = 0;
  }
  for (int n = d - 1; n >= 0; --n) {
    auto& here = levels_[static_cast<size_t>(n)];
    auto& below = levels_[static_cast<size_t>(n) + 1];
    for (size_t a = 0; a < here.size(); ++a) {
      here[a].leaf_begin = below[static_cast<size_t>(here[a].child_begin)].leaf_begin;
      here[a].leaf_end = below[static_cast<size_t>(here[a].child_end) - 1].leaf_end;
      for (int c = here[a].child_begin; c < here[a].child_end; ++c) below[static_cast<size_t>(c)].parent = static_cast<int>(a);
    }
  }
  levels_[0][0].parent = -1;
  leaf_to_atom_.assign(static_cast<size_t>(d) + 1, std::vector<int>(leaves.size()));
  for (int n = 0; n <= d; ++n) {
    const auto& here = levels_[static_cast<size_t>(n)];
    auto& map = leaf_to_atom_[static_cast<size_t>(n)];
    for (size_t a = 0; a < here.size(); ++a)
      for (int l = here[a].leaf_begin; l < here[a].leaf_end; ++l) map[static_cast<size_t>(l)] = static_cast<int>(a);
  }
}

TreeSpec FilteredSpace::to_tree() const {
  // Persisting single-child chains are collapsed back into leaves.
  auto build = [&](auto&& self, int n, int a) -> TreeSpec {
    const Atom& at = atom(n, a);
    TreeSpec node{at.prob, {}};
    if (n == depth()) return node;
    if (at.child_end - at.child_begin == 1) {
      TreeSpec only = self(self, n + 1, at.child_begin);
      if (only.children.empty()) return node;
      node.children.push_back(std::move(only));
      return node;
    }
    for (int c = at.child_begin; c < at.child_end; ++c) node.children.push_back(self(self, n + 1, c));
    return node;
  };
  return build(build, 0, 0);
}

LeafFunction LeafFunction::scalar(const std::vector<double>& v) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return LeafFunction(std::move(m));
}

LevelFunction cond_expect(const FilteredSpace& space, const LeafFunction& f, int n) {
  if (f.size() != space.num_leaves()) throw ValidationError("cond_expect: function size does not match leaf count");
  const auto atoms = space.level(n);
  LevelFunction out(f.dim(), static_cast<Eigen::Index>(atoms.size()));
  for (size_t a = 0; a < atoms.size(); ++a) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.dim());
    double mass = 0.0;
    for (int l = atoms[a].leaf_begin; l < atoms[a].leaf_end; ++l) {
      acc += space.leaf_prob(l) * f.at(l);
      mass += space.leaf_prob(l);
    }
    out.col(static_cast<Eigen::Index>(a)) = acc / mass;
  }
  return out;
}

LeafFunction lift(const FilteredSpace& space, const LevelFunction& g, int n) {
  const auto map = space.atom_map(n);
  LeafFunction out = LeafFunction::zeros(static_cast<int>(g.rows()), space.num_leaves());
  for (int l = 0; l < space.num_leaves(); ++l) out.at(l) = g.col(map[static_cast<size_t>(l)]);
  return out;
}

Martingale::Martingale(const FilteredSpace& space, const LeafFunction& f, DiffConvention conv) : conv_(conv) {
  if (f.size() != space.num_leaves()) throw ValidationError("martingale: function size does not match leaf count");
  if (!f.values.allFinite()) throw ValidationError("martingale: non-finite entries");
  const int d = space.depth();
  levels_.reserve(static_cast<size_t>(d) + 1);
  for (int n = 0; n <= d; ++n) levels_.push_back(cond_expect(space, f, n));
  diffs_.resize(static_cast<size_t>(d) + 1);
  for (int k = 1; k <= d; ++k) {
    const auto atoms = space.level(k);
    LevelFunction dk(f.dim(), static_cast<Eigen::Index>(atoms.size()));
    for (size_t a = 0; a < atoms.size(); ++a) {
      const auto col = static_cast<Eigen::Index>(a);
      if (k == 1 && conv == DiffConvention::kFoldMean)
        dk.col(col) = levels_[1].col(col);
      else
        dk.col(col) = levels_[static_cast<size_t>(k)].col(col) - levels_[static_cast<size_t>(k) - 1].col(atoms[a].parent);
    }
    diffs_[static_cast<size_t>(k)] = std::move(dk);
  }
}

Martingale martingale_of(const FilteredSpace& space, const LeafFunction& f, DiffConvention conv) {
  return Martingale(space, f, conv);
}

double lp_norm(const FilteredSpace& space, const LeafFunction& f, double p) {
  if (!(p >= 1.0)) throw ValidationError("lp_norm: p must be >= 1");
  if (f.size() != space.num_leaves()) throw ValidationError("lp_norm: function size does not match leaf count");
  double acc = 0.0;
  for (int l = 0; l < space.num_leaves(); ++l) acc += space.leaf_prob(l) * std::pow(f.at(l).norm(), p);
  return std::pow(acc, 1.0 / p);
}

}  // namespace wml
