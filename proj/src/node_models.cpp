#include "motr/node_models.hpp"

#include <cmath>
#include <sstream>

#include "motr/kernels.hpp"

namespace motr {

std::string to_string(LeafModel model) { return model == LeafModel::Constant ? "constant" : "linear"; }
std::string to_string(CovariateRule rule) { return rule == CovariateRule::TreeSplits ? "tree-splits" : "ancestors"; }

LeafModel parse_leaf_model(const std::string& text) {
  if (text == "constant") return LeafModel::Constant;
  if (text == "linear") return LeafModel::Linear;
  throw std::invalid_argument("unknown leaf model '" + text + "' (expected constant or linear)");
}

CovariateRule parse_covariate_rule(const std::string& text) {
  if (text == "tree-splits" || text == "splits") return CovariateRule::TreeSplits;
  if (text == "ancestors") return CovariateRule::Ancestors;
  throw std::invalid_argument("unknown covariate rule '" + text + "' (expected tree-splits or ancestors)");
}

Eigen::VectorXd LinearPrior::diagonal(Eigen::Index q) const {
  Eigen::VectorXd d = Eigen::VectorXd::Constant(q, slopeVariance);
  d[0] = interceptVariance;
  return d;
}

std::vector<std::vector<int>> leaf_covariate_sets(const Tree& tree, CovariateRule rule) {
  std::vector<std::vector<int>> sets(tree.nodes().size());
  if (rule == CovariateRule::TreeSplits) {
    const auto used = split_covariates(tree);
    const std::vector<int> shared(used.begin(), used.end());
    for (int leaf : tree.terminals()) sets[static_cast<std::size_t>(leaf)] = shared;
  } else {
    for (int leaf : tree.terminals()) {
      const auto anc = ancestor_covariates(tree, leaf);
      sets[static_cast<std::size_t>(leaf)].assign(anc.begin(), anc.end());
    }
  }
  return sets;
}

std::vector<Eigen::MatrixXd> build_leaf_design(const Tree& tree, const Partition& part, const Eigen::MatrixXd& features,
                                               const std::vector<std::vector<int>>& covariateSets) {
  const auto terms = tree.terminals();
  std::vector<int> slot(tree.nodes().size(), -1);
  std::vector<Eigen::MatrixXd> designs;
  std::vector<Eigen::Index> fill(terms.size(), 0);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto leaf = static_cast<std::size_t>(terms[k]);
    slot[leaf] = static_cast<int>(k);
    designs.emplace_back(part.counts[leaf], static_cast<Eigen::Index>(covariateSets[leaf].size()) + 1);
  }
  for (std::size_t i = 0; i < part.leafOf.size(); ++i) {
    const auto leaf = static_cast<std::size_t>(part.leafOf[i]);
    const auto k = static_cast<std::size_t>(slot[leaf]);
    const Eigen::Index r = fill[k]++;
    designs[k](r, 0) = 1.0;
    const auto& cov = covariateSets[leaf];
    for (std::size_t c = 0; c < cov.size(); ++c) {
      designs[k](r, static_cast<Eigen::Index>(c) + 1) = features(static_cast<Eigen::Index>(i), cov[c]);
    }
  }
  return designs;
}

std::vector<LeafSufficientStats> leaf_stats(const Tree& tree, const Partition& part, const Eigen::MatrixXd& features,
                                            std::span<const double> residuals,
                                            const std::vector<std::vector<int>>& covariateSets) {
  const auto terms = tree.terminals();
  std::vector<int> slot(tree.nodes().size(), -1);
  std::vector<LeafSufficientStats> stats(terms.size());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto leaf = static_cast<std::size_t>(terms[k]);
    slot[leaf] = static_cast<int>(k);
    auto& s = stats[k];
    s.leafId = terms[k];
    s.covariates = covariateSets.empty() ? std::vector<int>{} : covariateSets[leaf];
    s.gram = Eigen::MatrixXd::Zero(s.q(), s.q());
    s.xtr = Eigen::VectorXd::Zero(s.q());
  }
  Eigen::VectorXd x;
  for (std::size_t i = 0; i < part.leafOf.size(); ++i) {
    auto& s = stats[static_cast<std::size_t>(slot[static_cast<std::size_t>(part.leafOf[i])])];
    const double r = residuals[i];
    ++s.n;
    s.residualSum += r;
    s.residualSquareSum += r * r;
    const Eigen::Index q = s.q();
    if (q == 1) continue;
    x.resize(q);
    x[0] = 1.0;
    for (Eigen::Index c = 1; c < q; ++c) x[c] = features(static_cast<Eigen::Index>(i), s.covariates[static_cast<std::size_t>(c - 1)]);
    s.gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
    s.xtr.noalias() += r * x;
  }
  for (auto& s : stats) {
    if (s.q() == 1) {
      s.gram(0, 0) = static_cast<double>(s.n);
      s.xtr[0] = s.residualSum;
    } else {
      s.gram.triangularView<Eigen::StrictlyUpper>() = s.gram.transpose();
    }
  }
  return stats;
}

double bart_log_marginal(std::span<const LeafSufficientStats> stats, double sigma2, double sigmaMu2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("bart_log_marginal: sigma2 must be positive");
  double total = 0.0;
  for (const auto& s : stats) {
    const double n = static_cast<double>(s.n);
    const double denom = sigmaMu2 * n + sigma2;
    const double sum = s.residualSum;
    total += 0.5 * std::log(sigma2 / denom) + sigmaMu2 * sum * sum / (2.0 * sigma2 * denom);
  }
  return total;
}

NormalPosterior bart_mu_posterior(const LeafSufficientStats& stats, double sigma2, double sigmaMu2) {
  const double precision = static_cast<double>(stats.n) / sigma2 + 1.0 / sigmaMu2;
  return {stats.residualSum / sigma2 / precision, 1.0 / precision};
}

double bart_sample_mu(const LeafSufficientStats& stats, double sigma2, double sigmaMu2, Rng& rng) {
  const auto post = bart_mu_posterior(stats, sigma2, sigmaMu2);
  return rng.normal(post.mean, std::sqrt(post.variance));
}

namespace {

// Cholesky of the posterior precision X'X + V^-1, with one jittered retry.
Eigen::LLT<Eigen::MatrixXd> factor_precision(const LeafSufficientStats& s, const Eigen::VectorXd& vdiag) {
  Eigen::MatrixXd precision = s.gram;
  precision.diagonal() += vdiag.cwiseInverse();
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() == Eigen::Success) return llt;
  const double jitter = 1e-10 * precision.trace() / static_cast<double>(precision.rows());
  Eigen::MatrixXd jittered = precision;
  jittered.diagonal().array() += jitter;
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(precision, Eigen::EigenvaluesOnly);
  const double cond = eig.eigenvalues().cwiseAbs().maxCoeff() / eig.eigenvalues().cwiseAbs().minCoeff();
  std::ostringstream msg;
  msg << "leaf " << s.leafId << ": posterior precision not positive definite (condition estimate " << cond << ")";
  throw LinearAlgebraError(s.leafId, cond, msg.str());
}

}  // namespace

double motr_log_marginal(std::span<const LeafSufficientStats> stats, double sigma2, const LinearPrior& prior) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("motr_log_marginal: sigma2 must be positive");
  double total = 0.0;
  Eigen::Index n = 0;
  for (const auto& s : stats) {
    n += s.n;
    const Eigen::VectorXd vdiag = prior.diagonal(s.q());
    const auto llt = factor_precision(s, vdiag);
    const Eigen::VectorXd mean = llt.solve(s.xtr);
    const double logDetV = vdiag.array().log().sum();
    const double logDetLambda = -2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double quad = s.xtr.dot(mean);  // mu' Lambda^-1 mu
    total += -0.5 * logDetV + 0.5 * logDetLambda - (s.residualSquareSum - quad) / (2.0 * sigma2);
  }
  return total - 0.5 * static_cast<double>(n) * std::log(sigma2);
}

LinearPosterior motr_beta_posterior(const LeafSufficientStats& stats, const LinearPrior& prior) {
  const auto llt = factor_precision(stats, prior.diagonal(stats.q()));
  LinearPosterior post;
  post.mean = llt.solve(stats.xtr);
  post.lambda = llt.solve(Eigen::MatrixXd::Identity(stats.q(), stats.q()));
  return post;
}

Eigen::VectorXd motr_sample_beta(const LeafSufficientStats& stats, double sigma2, const LinearPrior& prior, Rng& rng) {
  const auto llt = factor_precision(stats, prior.diagonal(stats.q()));
  Eigen::VectorXd z(stats.q());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
  // With precision P = L L', L^-T z has covariance P^-1 = Lambda.
  Eigen::VectorXd noise = llt.matrixU().solve(z);
  return llt.solve(stats.xtr) + std::sqrt(sigma2) * noise;
}

std::size_t leaf_parameter_count(const Tree& tree, LeafModel model, CovariateRule rule) {
  if (model == LeafModel::Constant) return tree.terminal_count();
  if (rule == CovariateRule::TreeSplits) return tree.terminal_count() * (split_covariates(tree).size() + 1);
  std::size_t total = 0;
  for (int leaf : tree.terminals()) total += ancestor_covariates(tree, leaf).size() + 1;
  return total;
}

}  // namespace motr
