#include <omp.h>

#include "motr/kernels.hpp"

namespace motr::kernels::omp {

void route_rows(const Tree& tree, const Eigen::MatrixXd& X, std::span<int> leafOf) {
  const Eigen::Index n = X.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) leafOf[static_cast<std::size_t>(i)] = tree.find_leaf(RowView{X, i});
}

void evaluate_tree(const Tree& tree, const Eigen::MatrixXd& X, std::span<double> out) {
  const Eigen::Index n = X.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    RowView row{X, i};
    out[static_cast<std::size_t>(i)] = tree.node(tree.find_leaf(row)).leaf.evaluate(row);
  }
}

void accumulate_ensemble(std::span<const Tree> trees, const Eigen::MatrixXd& X, std::span<double> out) {
  const Eigen::Index n = X.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    RowView row{X, i};
    double sum = 0.0;
    for (const Tree& tree : trees) sum += tree.node(tree.find_leaf(row)).leaf.evaluate(row);
    out[static_cast<std::size_t>(i)] = sum;
  }
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace motr::kernels::omp
