#include <vector>

#include "doctest.h"
#include "motr/kernels.hpp"

using namespace motr;

namespace {

Tree random_tree(Rng& rng, int p, int grows, bool linear) {
  Tree tree;
  for (int g = 0; g < grows; ++g) {
    const auto leaves = tree.terminals();
    tree.grow(leaves[rng.index(leaves.size())], SplitRule{static_cast<int>(rng.index(static_cast<std::size_t>(p))), rng.normal()});
  }
  for (int leaf : tree.terminals()) {
    LeafParams& lp = tree.node(leaf).leaf;
    lp.coef = {rng.normal()};
    if (linear) {
      for (int j = 0; j < p; ++j) {
        if (rng.uniform() < 0.5) {
          lp.covariates.push_back(j);
          lp.coef.push_back(rng.normal());
        }
      }
    }
  }
  return tree;
}

Eigen::MatrixXd random_matrix(Eigen::Index n, int p, Rng& rng) {
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  return X;
}

}  // namespace

TEST_CASE("serial and openmp kernels agree bit for bit") {
  Rng rng(12);
  for (Eigen::Index n : {1, 7, 1000, 9000}) {
    const Eigen::MatrixXd X = random_matrix(n, 4, rng);
    std::vector<Tree> trees;
    for (int t = 0; t < 8; ++t) trees.push_back(random_tree(rng, 4, 6, t % 2 == 0));

    for (const Tree& tree : trees) {
      std::vector<int> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
      kernels::serial::route_rows(tree, X, a);
      kernels::omp::route_rows(tree, X, b);
      CHECK(a == b);

      std::vector<double> fa(static_cast<std::size_t>(n)), fb(static_cast<std::size_t>(n));
      kernels::serial::evaluate_tree(tree, X, fa);
      kernels::omp::evaluate_tree(tree, X, fb);
      CHECK(fa == fb);
    }
    std::vector<double> ea(static_cast<std::size_t>(n)), eb(static_cast<std::size_t>(n));
    kernels::serial::accumulate_ensemble(trees, X, ea);
    kernels::omp::accumulate_ensemble(trees, X, eb);
    CHECK(ea == eb);
  }
}

TEST_CASE("ensemble equals the sum of per-tree outputs") {
  Rng rng(3);
  const Eigen::MatrixXd X = random_matrix(50, 3, rng);
  std::vector<Tree> trees;
  for (int t = 0; t < 5; ++t) trees.push_back(random_tree(rng, 3, 4, true));
  std::vector<double> total(50);
  kernels::accumulate_ensemble(trees, X, total);
  for (Eigen::Index i = 0; i < 50; ++i) {
    double sum = 0.0;
    for (const Tree& tree : trees) {
      const int leaf = tree.find_leaf(kernels::RowView{X, i});
      sum += tree.node(leaf).leaf.evaluate(kernels::RowView{X, i});
    }
    CHECK(total[static_cast<std::size_t>(i)] == doctest::Approx(sum).epsilon(1e-14));
  }
}

TEST_CASE("dispatch threshold is adjustable") {
  const auto saved = kernels::parallel_threshold();
  kernels::set_parallel_threshold(1);
  CHECK(kernels::parallel_threshold() == 1);
  Rng rng(5);
  const Eigen::MatrixXd X = random_matrix(100, 2, rng);
  const Tree tree = random_tree(rng, 2, 3, false);
  std::vector<int> viaDispatch(100), viaSerial(100);
  kernels::route_rows(tree, X, viaDispatch);
  kernels::serial::route_rows(tree, X, viaSerial);
  CHECK(viaDispatch == viaSerial);
  kernels::set_parallel_threshold(saved);
  CHECK(kernels::omp::max_threads() >= 1);
}
