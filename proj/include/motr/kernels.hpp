#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "motr/tree.hpp"

// Row-parallel kernels. Each has a serial reference implementation and an
// OpenMP one; every row is processed independently, so both paths produce
// bit-identical output. The unqualified entry points dispatch on row count.
namespace motr::kernels {

struct RowView {
  const Eigen::MatrixXd& X;
  Eigen::Index row;
  double operator[](int j) const { return X(row, j); }
};

namespace serial {
void route_rows(const Tree& tree, const Eigen::MatrixXd& X, std::span<int> leafOf);
void evaluate_tree(const Tree& tree, const Eigen::MatrixXd& X, std::span<double> out);
void accumulate_ensemble(std::span<const Tree> trees, const Eigen::MatrixXd& X, std::span<double> out);
}  // namespace serial

namespace omp {
void route_rows(const Tree& tree, const Eigen::MatrixXd& X, std::span<int> leafOf);
void evaluate_tree(const Tree& tree, const Eigen::MatrixXd& X, std::span<double> out);
void accumulate_ensemble(std::span<const Tree> trees, const Eigen::MatrixXd& X, std::span<double> out);
int max_threads();
}  // namespace omp

// Row count at or above which dispatch uses the OpenMP path.
Eigen::Index parallel_threshold();
void set_parallel_threshold(Eigen::Index rows);

void route_rows(const Tree& tree, const Eigen::MatrixXd& X, std::span<int> leafOf);
void evaluate_tree(const Tree& tree, const Eigen::MatrixXd& X, std::span<double> out);
// out[i] = sum over trees of the tree's output at row i.
void accumulate_ensemble(std::span<const Tree> trees, const Eigen::MatrixXd& X, std::span<double> out);

}  // namespace motr::kernels
