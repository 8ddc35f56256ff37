#include <atomic>

#include "motr/kernels.hpp"

namespace motr::kernels {

namespace serial {

void route_rows(const Tree& tree, const Eigen::MatrixXd& X, std::span<int> leafOf) {
  for (Eigen::Index i = 0; i < X.rows(); ++i) leafOf[static_cast<std::size_t>(i)] = tree.find_leaf(RowView{X, i});
}

void evaluate_tree(const Tree& tree, const Eigen::MatrixXd& X, std::span<double> out) {
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    RowView row{X, i};
    out[static_cast<std::size_t>(i)] = tree.node(tree.find_leaf(row)).leaf.evaluate(row);
  }
}

void accumulate_ensemble(std::span<const Tree> trees, const Eigen::MatrixXd& X, std::span<double> out) {
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    RowView row{X, i};
    double sum = 0.0;
    for (const Tree& tree : trees) sum += tree.node(tree.find_leaf(row)).leaf.evaluate(row);
    out[static_cast<std::size_t>(i)] = sum;
  }
}

}  // namespace serial

namespace {
std::atomic<Eigen::Index> g_threshold{4096};
}

Eigen::Index parallel_threshold() { return g_threshold.load(); }
void set_parallel_threshold(Eigen::Index rows) { g_threshold.store(rows); }

void route_rows(const Tree& tree, const Eigen::MatrixXd& X, std::span<int> leafOf) {
  if (X.rows() >= parallel_threshold()) {
    omp::route_rows(tree, X, leafOf);
  } else {
    serial::route_rows(tree, X, leafOf);
  }
}

void evaluate_tree(const Tree& tree, const Eigen::MatrixXd& X, std::span<double> out) {
  if (X.rows() >= parallel_threshold()) {
    omp::evaluate_tree(tree, X, out);
  } else {
    serial::evaluate_tree(tree, X, out);
  }
}

void accumulate_ensemble(std::span<const Tree> trees, const Eigen::MatrixXd& X, std::span<double> out) {
  if (X.rows() * static_cast<Eigen::Index>(trees.size()) >= parallel_threshold()) {
    omp::accumulate_ensemble(trees, X, out);
  } else {
    serial::accumulate_ensemble(trees, X, out);
  }
}

}  // namespace motr::kernels
