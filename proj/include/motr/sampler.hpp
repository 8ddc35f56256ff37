#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "motr/data.hpp"
#include "motr/node_models.hpp"
#include "motr/random.hpp"
#include "motr/tree.hpp"

namespace motr {

enum class Branching { Uniform, Dirichlet };
enum class PrecisionMode { FixedTauB, InterceptSlope };

std::string to_string(Branching b);
std::string to_string(PrecisionMode mode);
Branching parse_branching(const std::string& text);

struct Hyperparams {
  int trees = 10;
  double alpha = 0.95;
  double betaDepth = 2.0;
  double nu = 3.0;
  std::optional<double> lambda;  // calibrated from the response when unset
  double c = 2.0;
  int burnIn = 1000;
  int postBurnIn = 5000;
  int thin = 1;
  LeafModel leafModel = LeafModel::Linear;
  CovariateRule covariateRule = CovariateRule::TreeSplits;
  std::optional<Branching> branching;  // Dirichlet for linear leaves, uniform otherwise
  PrecisionMode precisionMode = PrecisionMode::InterceptSlope;
  std::optional<double> tauB;  // defaults to the tree count
  double a0 = 0.5, b0 = 0.5, a1 = 0.5, b1 = 0.5;
  double dirichletMass = 1.0;
  int nMin = 5;
  std::uint64_t seed = 1;
  bool storeTrees = false;
  bool transitionCorrection = false;

  void validate() const;  // throws std::invalid_argument
  Branching resolved_branching() const;
  double resolved_tau_b() const { return tauB.value_or(static_cast<double>(trees)); }
  int retained() const { return postBurnIn / thin; }
};

void to_json(nlohmann::json& j, const Hyperparams& hp);
void from_json(const nlohmann::json& j, Hyperparams& hp);

struct MoveCounters {
  std::array<long, kMoveKinds> proposed{};
  std::array<long, kMoveKinds> accepted{};
  std::array<long, kMoveKinds> rejected{};
  std::array<long, kMoveKinds> invalid{};

  MoveCounters& operator+=(const MoveCounters& other);
};

struct DrawRecord {
  int iteration = 0;
  double sigma2 = 1.0;
  double tauBeta0 = 0.0;
  double tauBeta = 0.0;
  std::vector<int> terminalCounts;
  std::vector<int> parameterCounts;
  MoveCounters moves;  // proposals made during this iteration
  std::vector<Tree> trees;  // only when storeTrees
};

struct PosteriorDraws {
  Task task = Task::Regression;
  LeafModel leafModel = LeafModel::Linear;
  CovariateRule covariateRule = CovariateRule::TreeSplits;
  int treeCount = 0;
  double lambda = 0.0;
  std::vector<DrawRecord> records;
  Eigen::MatrixXd trainPredictions;  // retained draws x n, original scale (probabilities for classification)
  Eigen::MatrixXd testPredictions;   // retained draws x nTest, when a test matrix was supplied
  std::vector<double> sigma2Trace;   // every iteration, burn-in included
  MoveCounters totals;

  Eigen::VectorXd train_mean() const { return trainPredictions.colwise().mean(); }
  Eigen::VectorXd test_mean() const { return testPredictions.colwise().mean(); }
};

struct SamplerState {
  std::vector<Tree> trees;
  std::vector<Partition> partitions;
  Eigen::MatrixXd fits;     // n x m, column t = g(X; T_t)
  Eigen::VectorXd fitTotal;  // sum over columns, maintained incrementally
  Eigen::VectorXd target;    // scaled y (regression) or latent z (classification)
  double sigma2 = 1.0;
  double tauBeta0 = 1.0;
  double tauBeta = 1.0;
  std::vector<double> splitProbs;
  int iteration = 0;
};

struct MhRecord {
  MoveKind kind = MoveKind::Grow;
  bool valid = false;
  bool accepted = false;
  double logRatio = 0.0;
};

// Gibbs draws and helpers with closed-form full conditionals.
double sample_sigma2(double totalSquaredResid, Eigen::Index n, double nu, double lambda, Rng& rng);
double sample_tau_intercept(std::span<const double> intercepts, double sigma2, double a0, double b0, Rng& rng);
double sample_tau_slopes(std::span<const double> slopes, double sigma2, double a1, double b1, Rng& rng);
std::vector<double> dirichlet_update_splitprobs(std::span<const int> splitCounts, double dirichletMass, Rng& rng);
Eigen::VectorXd sample_latent_z(const Eigen::VectorXd& yBinary, const Eigen::VectorXd& fit, Rng& rng);
bool mh_accept(double logRatio, Rng& rng);

// lambda such that P(sigma2 < varianceEstimate) = quantile under IG(nu/2, nu lambda/2).
double calibrate_lambda(double varianceEstimate, double nu, double quantile = 0.90);

// One MCMC chain on a standardized training set.
class Sampler {
 public:
  Sampler(const Dataset& train, const ScalingInfo& scaling, const Hyperparams& hp, std::uint64_t stream = 0);

  // One full iteration: latent z (classification), every tree, then the
  // global parameters.
  void sweep();
  MhRecord mh_tree_step(int t);

  // Partial residual from the maintained running fit, and from a fresh
  // re-evaluation of every other tree.
  Eigen::VectorXd partial_residual(int t) const;
  Eigen::VectorXd partial_residual_full(int t) const;
  // max_t max_i |target_i - (R_t[i] + sum_{j != t} fit_j[i])| with fits re-evaluated.
  double residual_identity_error() const;

  PosteriorDraws run(const Eigen::MatrixXd* testScaled = nullptr);

  const SamplerState& state() const { return state_; }
  SamplerState& mutable_state() { return state_; }
  const MoveCounters& counters() const { return counters_; }
  LinearPrior linear_prior() const;
  double sigma_mu2() const { return sigmaMu2_; }
  double lambda() const { return lambda_; }
  Rng& rng() { return rng_; }

 private:
  std::vector<std::vector<int>> covariate_sets(const Tree& tree) const;
  double log_marginal(std::span<const LeafSufficientStats> stats) const;
  void redraw_leaves(int t, const std::vector<LeafSufficientStats>& stats);
  void update_globals();
  DrawRecord make_record() const;

  const Dataset& train_;
  const ScalingInfo& scaling_;
  Hyperparams hp_;
  SplitDictionary dict_;
  Rng rng_;
  SamplerState state_;
  MoveCounters counters_;
  double sigmaMu2_ = 1.0;
  double lambda_ = 1.0;
  bool classification_ = false;
};

PosteriorDraws run_regression(const Dataset& train, const ScalingInfo& scaling, const Hyperparams& hp,
                              const Eigen::MatrixXd* testScaled = nullptr);
PosteriorDraws run_classification(const Dataset& train, const ScalingInfo& scaling, const Hyperparams& hp,
                                  const Eigen::MatrixXd* testScaled = nullptr);

// Fit on raw data: standardizes with training statistics, runs the chain,
// and reports predictions on the original scale.
struct FitResult {
  ScalingInfo scaling;
  PosteriorDraws draws;
};
FitResult fit(const Dataset& rawTrain, const Hyperparams& hp, const Eigen::MatrixXd* rawTest = nullptr);

struct PredictionSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd lower;  // 5% quantile
  Eigen::VectorXd upper;  // 95% quantile
  Eigen::MatrixXd perDraw;
};

// Replay stored trees on new raw rows.
PredictionSummary predict(std::span<const DrawRecord> records, Task task, const Eigen::MatrixXd& rawFeatures,
                          const ScalingInfo& scaling);

double standard_normal_cdf(double x);

}  // namespace motr
