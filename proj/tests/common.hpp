#pragma once

#include "wml/experiments.hpp"
#include "wml/filtration.hpp"
#include "wml/linalg.hpp"
#include "wml/matrix_weights.hpp"
#include "wml/operators.hpp"
#include "wml/principal_sets.hpp"
#include "wml/reducing.hpp"

#include <Eigen/Geometry>
#include <Eigen/QR>

#include <memory>
#include <random>

namespace wt {

using namespace wml;

inline std::shared_ptr<const FilteredSpace> dyadic(int depth) {
  return std::make_shared<const FilteredSpace>(FilteredSpace::dyadic(depth));
}

// Random tree with branching 1..3 and uneven masses.
inline std::shared_ptr<const FilteredSpace> random_tree(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> br(1, 3);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  auto grow = [&](auto& self, TreeSpec& node, int level) -> void {
    if (level == depth) return;
    const int k = level == 0 ? 2 : br(rng);
    std::vector<double> m(static_cast<size_t>(k));
    double sum = 0;
    for (double& x : m) sum += (x = u(rng));
    for (double x : m) {
      node.children.push_back(TreeSpec{node.mass * x / sum, {}});
      self(self, node.children.back(), level + 1);
    }
  };
  TreeSpec root;
  grow(grow, root, 0);
  return std::make_shared<const FilteredSpace>(FilteredSpace::from_tree(root));
}

inline Mat random_spd(std::mt19937_64& rng, int d, double spread = 1.0) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = n01(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  Eigen::VectorXd ev(d);
  for (int i = 0; i < d; ++i) ev(i) = std::exp(spread * n01(rng));
  return q * ev.asDiagonal() * q.transpose();
}

inline MatrixWeight random_weight(std::mt19937_64& rng, int d, int leaves, double spread = 1.0) {
  std::vector<Mat> w;
  for (int i = 0; i < leaves; ++i) w.push_back(random_spd(rng, d, spread));
  return MatrixWeight(d, std::move(w));
}

inline std::vector<double> random_scalar_weight(std::mt19937_64& rng, int leaves, double spread = 1.0) {
  std::normal_distribution<double> n01;
  std::vector<double> w(static_cast<size_t>(leaves));
  for (double& x : w) x = std::exp(spread * n01(rng));
  return w;
}

inline LeafFunction random_function(std::mt19937_64& rng, int d, int leaves) {
  std::normal_distribution<double> n01;
  LeafFunction f = LeafFunction::zeros(d, leaves);
  for (int l = 0; l < leaves; ++l)
    for (int i = 0; i < d; ++i) f.values(i, l) = n01(rng);
  return f;
}

inline double max_abs_diff(const LeafFunction& a, const LeafFunction& b) {
  return (a.values - b.values).cwiseAbs().maxCoeff();
}

}  // namespace wt
