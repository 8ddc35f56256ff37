#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "motr/random.hpp"
#include "motr/tree.hpp"

namespace motr {

enum class LeafModel { Constant, Linear };
enum class CovariateRule { TreeSplits, Ancestors };

std::string to_string(LeafModel model);
std::string to_string(CovariateRule rule);
LeafModel parse_leaf_model(const std::string& text);
CovariateRule parse_covariate_rule(const std::string& text);

class LinearAlgebraError : public std::runtime_error {
 public:
  LinearAlgebraError(int leaf, double conditionEstimate, const std::string& what)
      : std::runtime_error(what), leafId(leaf), condition(conditionEstimate) {}
  int leafId;
  double condition;
};

// Sufficient statistics of the partial residuals r in one terminal node.
// X is the leaf design: a column of ones followed by the leaf's covariates
// in ascending feature order.
struct LeafSufficientStats {
  int leafId = -1;
  std::vector<int> covariates;
  Eigen::Index n = 0;
  double residualSum = 0.0;
  double residualSquareSum = 0.0;
  Eigen::MatrixXd gram;  // X'X, q x q
  Eigen::VectorXd xtr;   // X'r

  Eigen::Index q() const { return static_cast<Eigen::Index>(covariates.size()) + 1; }
};

// Diagonal of the prior covariance factor V (beta ~ N(0, sigma2 V)).
struct LinearPrior {
  double interceptVariance = 1.0;  // V_11
  double slopeVariance = 1.0;      // V_jj, j > 1

  static LinearPrior fixed(double tauB) { return {1.0 / tauB, 1.0 / tauB}; }
  static LinearPrior intercept_slope(double tauBeta0, double tauBeta) { return {1.0 / tauBeta0, 1.0 / tauBeta}; }
  Eigen::VectorXd diagonal(Eigen::Index q) const;
};

// Covariate set of each terminal under the given rule, keyed by terminal id.
std::vector<std::vector<int>> leaf_covariate_sets(const Tree& tree, CovariateRule rule);

// One n_l x q design matrix per terminal (ordered as tree.terminals()).
// Covariates are used in the order given; leaf_covariate_sets sorts them.
std::vector<Eigen::MatrixXd> build_leaf_design(const Tree& tree, const Partition& part, const Eigen::MatrixXd& features,
                                               const std::vector<std::vector<int>>& covariateSets);

// Accumulate stats for every terminal, ordered as tree.terminals().
// covariateSets is indexed by node id (empty for constant leaves).
std::vector<LeafSufficientStats> leaf_stats(const Tree& tree, const Partition& part, const Eigen::MatrixXd& features,
                                            std::span<const double> residuals,
                                            const std::vector<std::vector<int>>& covariateSets);

// Constant-leaf log marginal, up to the factor (2 pi sigma2)^(-n/2) exp(-r'r / 2 sigma2)
// which is shared by every tree evaluated on the same residuals.
double bart_log_marginal(std::span<const LeafSufficientStats> stats, double sigma2, double sigmaMu2);

// Posterior N(mean, variance) of one constant leaf.
struct NormalPosterior {
  double mean;
  double variance;
};
NormalPosterior bart_mu_posterior(const LeafSufficientStats& stats, double sigma2, double sigmaMu2);
double bart_sample_mu(const LeafSufficientStats& stats, double sigma2, double sigmaMu2, Rng& rng);

// Linear-leaf log marginal, up to the factor (2 pi)^(-n/2).
double motr_log_marginal(std::span<const LeafSufficientStats> stats, double sigma2, const LinearPrior& prior);

// Posterior of beta: mean Lambda X'r and covariance sigma2 Lambda.
struct LinearPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd lambda;  // (X'X + V^-1)^-1
};
LinearPosterior motr_beta_posterior(const LeafSufficientStats& stats, const LinearPrior& prior);
Eigen::VectorXd motr_sample_beta(const LeafSufficientStats& stats, double sigma2, const LinearPrior& prior, Rng& rng);

std::size_t leaf_parameter_count(const Tree& tree, LeafModel model, CovariateRule rule);

inline double default_sigma_mu2(double c, int trees) {
  const double sd = 0.5 / (c * std::sqrt(static_cast<double>(trees)));
  return sd * sd;
}

}  // namespace motr
