#include "motr/sampler.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "motr/kernels.hpp"

namespace motr {

std::string to_string(Branching b) { return b == Branching::Uniform ? "uniform" : "dirichlet"; }
std::string to_string(PrecisionMode mode) {
  return mode == PrecisionMode::FixedTauB ? "fixed-tau-b" : "intercept-slope";
}

Branching parse_branching(const std::string& text) {
  if (text == "uniform") return Branching::Uniform;
  if (text == "dirichlet") return Branching::Dirichlet;
  throw std::invalid_argument("unknown branching '" + text + "' (expected uniform or dirichlet)");
}

void Hyperparams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid hyperparameter: ") + what);
  };
  require(trees >= 1, "trees must be >= 1");
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
  require(betaDepth >= 0.0, "beta-depth must be >= 0");
  require(nu > 0.0, "nu must be > 0");
  require(!lambda || *lambda > 0.0, "lambda must be > 0");
  require(c >= 1.0 && c <= 3.0, "c must lie in [1,3]");
  require(burnIn >= 0 && postBurnIn >= 0 && burnIn + postBurnIn >= 1, "burn-in + iterations must be >= 1");
  require(thin >= 1, "thin must be >= 1");
  require(!tauB || *tauB > 0.0, "tau-b must be > 0");
  require(a0 > 0.0 && b0 > 0.0 && a1 > 0.0 && b1 > 0.0, "gamma prior parameters must be > 0");
  require(dirichletMass > 0.0, "dirichlet mass must be > 0");
  require(nMin >= 1, "nmin must be >= 1");
}

Branching Hyperparams::resolved_branching() const {
  if (branching) return *branching;
  return leafModel == LeafModel::Linear ? Branching::Dirichlet : Branching::Uniform;
}

void to_json(nlohmann::json& j, const Hyperparams& hp) {
  j = nlohmann::json{{"trees", hp.trees},
                     {"alpha", hp.alpha},
                     {"beta_depth", hp.betaDepth},
                     {"nu", hp.nu},
                     {"lambda", hp.lambda ? nlohmann::json(*hp.lambda) : nlohmann::json(nullptr)},
                     {"c", hp.c},
                     {"burnin", hp.burnIn},
                     {"iters", hp.postBurnIn},
                     {"thin", hp.thin},
                     {"leaf", to_string(hp.leafModel)},
                     {"covariate_rule", to_string(hp.covariateRule)},
                     {"branching", hp.branching ? nlohmann::json(to_string(*hp.branching)) : nlohmann::json("auto")},
                     {"vars_inter_slope", hp.precisionMode == PrecisionMode::InterceptSlope},
                     {"tau_b", hp.tauB ? nlohmann::json(*hp.tauB) : nlohmann::json(nullptr)},
                     {"a0", hp.a0},
                     {"b0", hp.b0},
                     {"a1", hp.a1},
                     {"b1", hp.b1},
                     {"dirichlet_mass", hp.dirichletMass},
                     {"nmin", hp.nMin},
                     {"seed", hp.seed},
                     {"store_trees", hp.storeTrees},
                     {"transition_correction", hp.transitionCorrection}};
}

void from_json(const nlohmann::json& j, Hyperparams& hp) {
  Hyperparams d;
  hp.trees = j.value("trees", d.trees);
  hp.alpha = j.value("alpha", d.alpha);
  hp.betaDepth = j.value("beta_depth", d.betaDepth);
  hp.nu = j.value("nu", d.nu);
  hp.lambda = (j.contains("lambda") && !j["lambda"].is_null()) ? std::optional<double>(j["lambda"].get<double>()) : std::nullopt;
  hp.c = j.value("c", d.c);
  hp.burnIn = j.value("burnin", d.burnIn);
  hp.postBurnIn = j.value("iters", d.postBurnIn);
  hp.thin = j.value("thin", d.thin);
  hp.leafModel = parse_leaf_model(j.value("leaf", to_string(d.leafModel)));
  hp.covariateRule = parse_covariate_rule(j.value("covariate_rule", to_string(d.covariateRule)));
  const std::string branching = j.value("branching", std::string("auto"));
  hp.branching = branching == "auto" ? std::nullopt : std::optional<Branching>(parse_branching(branching));
  hp.precisionMode = j.value("vars_inter_slope", true) ? PrecisionMode::InterceptSlope : PrecisionMode::FixedTauB;
  hp.tauB = (j.contains("tau_b") && !j["tau_b"].is_null()) ? std::optional<double>(j["tau_b"].get<double>()) : std::nullopt;
  hp.a0 = j.value("a0", d.a0);
  hp.b0 = j.value("b0", d.b0);
  hp.a1 = j.value("a1", d.a1);
  hp.b1 = j.value("b1", d.b1);
  hp.dirichletMass = j.value("dirichlet_mass", d.dirichletMass);
  hp.nMin = j.value("nmin", d.nMin);
  hp.seed = j.value("seed", d.seed);
  hp.storeTrees = j.value("store_trees", d.storeTrees);
  hp.transitionCorrection = j.value("transition_correction", d.transitionCorrection);
}

MoveCounters& MoveCounters::operator+=(const MoveCounters& other) {
  for (int k = 0; k < kMoveKinds; ++k) {
    proposed[k] += other.proposed[k];
    accepted[k] += other.accepted[k];
    rejected[k] += other.rejected[k];
    invalid[k] += other.invalid[k];
  }
  return *this;
}

double sample_sigma2(double totalSquaredResid, Eigen::Index n, double nu, double lambda, Rng& rng) {
  const double shape = 0.5 * (static_cast<double>(n) + nu);
  const double scale = 0.5 * (totalSquaredResid + nu * lambda);
  return rng.inverse_gamma(shape, scale);
}

double sample_tau_intercept(std::span<const double> intercepts, double sigma2, double a0, double b0, Rng& rng) {
  double ss = 0.0;
  for (double b : intercepts) ss += b * b;
  return rng.gamma(0.5 * static_cast<double>(intercepts.size()) + a0, ss / (2.0 * sigma2) + b0);
}

double sample_tau_slopes(std::span<const double> slopes, double sigma2, double a1, double b1, Rng& rng) {
  double ss = 0.0;
  for (double b : slopes) ss += b * b;
  return rng.gamma(0.5 * static_cast<double>(slopes.size()) + a1, ss / (2.0 * sigma2) + b1);
}

std::vector<double> dirichlet_update_splitprobs(std::span<const int> splitCounts, double dirichletMass, Rng& rng) {
  const double base = dirichletMass / static_cast<double>(splitCounts.size());
  std::vector<double> conc(splitCounts.size());
  for (std::size_t j = 0; j < conc.size(); ++j) conc[j] = base + splitCounts[j];
  return rng.dirichlet(conc);
}

Eigen::VectorXd sample_latent_z(const Eigen::VectorXd& yBinary, const Eigen::VectorXd& fit, Rng& rng) {
  Eigen::VectorXd z(yBinary.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.truncated_normal_unit(fit[i], yBinary[i] > 0.5);
  return z;
}

bool mh_accept(double logRatio, Rng& rng) {
  if (logRatio >= 0.0) return true;
  return std::log(rng.uniform()) < logRatio;
}

double calibrate_lambda(double varianceEstimate, double nu, double quantile) {
  // P(sigma2 < s2) = P(chi2_nu > nu lambda / s2) = quantile.
  boost::math::chi_squared chi(nu);
  return varianceEstimate * boost::math::quantile(chi, 1.0 - quantile) / nu;
}

// Phi never reaches 0 or 1; keep rounded tails inside the open interval.
double standard_normal_cdf(double x) {
  const double p = 0.5 * std::erfc(-x / std::sqrt(2.0));
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

namespace {

constexpr double kVarianceFloor = 1e-8;

double sample_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

Sampler::Sampler(const Dataset& train, const ScalingInfo& scaling, const Hyperparams& hp, std::uint64_t stream)
    : train_(train), scaling_(scaling), hp_(hp), dict_(split_dictionary(train)), rng_(hp.seed, stream) {
  hp_.validate();
  train_.validate();
  classification_ = train.task == Task::Classification;
  const Eigen::Index n = train.n();
  const int m = hp_.trees;

  state_.trees.assign(static_cast<std::size_t>(m), Tree{});
  state_.partitions.assign(static_cast<std::size_t>(m), partition(Tree{}, train.features));
  state_.fits = Eigen::MatrixXd::Zero(n, m);
  state_.fitTotal = Eigen::VectorXd::Zero(n);
  state_.splitProbs.assign(static_cast<std::size_t>(train.p()), 1.0 / static_cast<double>(train.p()));
  sigmaMu2_ = default_sigma_mu2(hp_.c, m);
  state_.tauBeta0 = hp_.resolved_tau_b();
  state_.tauBeta = hp_.resolved_tau_b();

  if (classification_) {
    state_.target.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) state_.target[i] = train.response[i] > 0.5 ? 0.5 : -0.5;
    state_.sigma2 = 1.0;
    lambda_ = 0.0;
  } else {
    state_.target = train.response;
    const double var = std::max(sample_variance(train.response), kVarianceFloor);
    state_.sigma2 = var;
    lambda_ = hp_.lambda ? *hp_.lambda : std::max(calibrate_lambda(var, hp_.nu), kVarianceFloor);
  }
}

LinearPrior Sampler::linear_prior() const {
  if (hp_.precisionMode == PrecisionMode::InterceptSlope) {
    return LinearPrior::intercept_slope(state_.tauBeta0, state_.tauBeta);
  }
  return LinearPrior::fixed(hp_.resolved_tau_b());
}

std::vector<std::vector<int>> Sampler::covariate_sets(const Tree& tree) const {
  if (hp_.leafModel == LeafModel::Constant) return {};
  return leaf_covariate_sets(tree, hp_.covariateRule);
}

double Sampler::log_marginal(std::span<const LeafSufficientStats> stats) const {
  if (hp_.leafModel == LeafModel::Constant) return bart_log_marginal(stats, state_.sigma2, sigmaMu2_);
  return motr_log_marginal(stats, state_.sigma2, linear_prior());
}

Eigen::VectorXd Sampler::partial_residual(int t) const {
  return state_.target - state_.fitTotal + state_.fits.col(t);
}

Eigen::VectorXd Sampler::partial_residual_full(int t) const {
  const Eigen::Index n = train_.n();
  Eigen::VectorXd others = Eigen::VectorXd::Zero(n);
  std::vector<double> buf(static_cast<std::size_t>(n));
  for (int j = 0; j < hp_.trees; ++j) {
    if (j == t) continue;
    kernels::evaluate_tree(state_.trees[static_cast<std::size_t>(j)], train_.features, buf);
    others += Eigen::Map<const Eigen::VectorXd>(buf.data(), n);
  }
  return state_.target - others;
}

double Sampler::residual_identity_error() const {
  const Eigen::Index n = train_.n();
  Eigen::MatrixXd fresh(n, hp_.trees);
  std::vector<double> buf(static_cast<std::size_t>(n));
  for (int j = 0; j < hp_.trees; ++j) {
    kernels::evaluate_tree(state_.trees[static_cast<std::size_t>(j)], train_.features, buf);
    fresh.col(j) = Eigen::Map<const Eigen::VectorXd>(buf.data(), n);
  }
  const Eigen::VectorXd total = fresh.rowwise().sum();
  double worst = 0.0;
  for (int t = 0; t < hp_.trees; ++t) {
    const Eigen::VectorXd others = total - fresh.col(t);
    const Eigen::VectorXd gap = state_.target - (partial_residual(t) + others);
    worst = std::max(worst, gap.cwiseAbs().maxCoeff());
  }
  return worst;
}

void Sampler::redraw_leaves(int t, const std::vector<LeafSufficientStats>& stats) {
  Tree& tree = state_.trees[static_cast<std::size_t>(t)];
  const LinearPrior prior = linear_prior();
  for (const auto& s : stats) {
    LeafParams& leaf = tree.node(s.leafId).leaf;
    leaf.covariates = s.covariates;
    if (hp_.leafModel == LeafModel::Constant) {
      leaf.coef.assign(1, bart_sample_mu(s, state_.sigma2, sigmaMu2_, rng_));
    } else {
      const Eigen::VectorXd beta = motr_sample_beta(s, state_.sigma2, prior, rng_);
      leaf.coef.assign(beta.data(), beta.data() + beta.size());
    }
  }
  const Partition& part = state_.partitions[static_cast<std::size_t>(t)];
  const Eigen::Index n = train_.n();
  auto col = state_.fits.col(t);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double next = tree.node(part.leafOf[static_cast<std::size_t>(i)]).leaf.evaluate(kernels::RowView{train_.features, i});
    state_.fitTotal[i] += next - col[i];
    col[i] = next;
  }
}

MhRecord Sampler::mh_tree_step(int t) {
  const auto ti = static_cast<std::size_t>(t);
  const Eigen::VectorXd residual = partial_residual(t);
  const std::span<const double> r(residual.data(), static_cast<std::size_t>(residual.size()));
  Tree& tree = state_.trees[ti];
  Partition& part = state_.partitions[ti];

  const ProposalContext ctx{train_.features, dict_, state_.splitProbs, hp_.nMin};
  MoveProposal prop = propose_move(tree, part, ctx, rng_);
  MhRecord rec;
  rec.kind = prop.kind;
  rec.valid = prop.valid;
  const auto k = static_cast<std::size_t>(prop.kind);
  ++counters_.proposed[k];

  auto currentStats = leaf_stats(tree, part, train_.features, r, covariate_sets(tree));
  if (!prop.valid) {
    ++counters_.invalid[k];
  } else {
    auto candidateStats = leaf_stats(prop.candidate, prop.candidatePartition, train_.features, r,
                                     covariate_sets(prop.candidate));
    const double current = log_marginal(currentStats) + log_tree_prior(tree, hp_.alpha, hp_.betaDepth);
    double candidate = log_marginal(candidateStats) + log_tree_prior(prop.candidate, hp_.alpha, hp_.betaDepth);
    if (hp_.transitionCorrection) candidate += prop.logTransitionCorrection;
    rec.logRatio = candidate - current;
    rec.accepted = mh_accept(rec.logRatio, rng_);
    if (rec.accepted) {
      ++counters_.accepted[k];
      tree = std::move(prop.candidate);
      part = std::move(prop.candidatePartition);
      currentStats = std::move(candidateStats);
    } else {
      ++counters_.rejected[k];
    }
  }
  redraw_leaves(t, currentStats);
  return rec;
}

void Sampler::update_globals() {
  if (!classification_) {
    const double sse = (state_.target - state_.fitTotal).squaredNorm();
    state_.sigma2 = sample_sigma2(sse, train_.n(), hp_.nu, lambda_, rng_);
  }
  if (hp_.leafModel == LeafModel::Linear && hp_.precisionMode == PrecisionMode::InterceptSlope) {
    std::vector<double> intercepts, slopes;
    for (const Tree& tree : state_.trees) {
      for (int leaf : tree.terminals()) {
        const auto& coef = tree.node(leaf).leaf.coef;
        intercepts.push_back(coef[0]);
        slopes.insert(slopes.end(), coef.begin() + 1, coef.end());
      }
    }
    state_.tauBeta0 = sample_tau_intercept(intercepts, state_.sigma2, hp_.a0, hp_.b0, rng_);
    state_.tauBeta = sample_tau_slopes(slopes, state_.sigma2, hp_.a1, hp_.b1, rng_);
  }
  if (hp_.resolved_branching() == Branching::Dirichlet) {
    std::vector<int> counts(static_cast<std::size_t>(train_.p()), 0);
    for (const Tree& tree : state_.trees) {
      for (const Node& nd : tree.nodes()) {
        if (!nd.is_terminal()) ++counts[static_cast<std::size_t>(nd.rule.feature)];
      }
    }
    state_.splitProbs = dirichlet_update_splitprobs(counts, hp_.dirichletMass, rng_);
  }
}

void Sampler::sweep() {
  if (classification_ && state_.iteration > 0) {
    state_.target = sample_latent_z(train_.response, state_.fitTotal, rng_);
  }
  for (int t = 0; t < hp_.trees; ++t) mh_tree_step(t);
  update_globals();
  ++state_.iteration;
}

DrawRecord Sampler::make_record() const {
  DrawRecord rec;
  rec.iteration = state_.iteration;
  rec.sigma2 = state_.sigma2;
  const bool linear = hp_.leafModel == LeafModel::Linear;
  rec.tauBeta0 = linear ? state_.tauBeta0 : 0.0;
  rec.tauBeta = linear ? state_.tauBeta : 0.0;
  for (const Tree& tree : state_.trees) {
    rec.terminalCounts.push_back(static_cast<int>(tree.terminal_count()));
    rec.parameterCounts.push_back(static_cast<int>(leaf_parameter_count(tree, hp_.leafModel, hp_.covariateRule)));
  }
  if (hp_.storeTrees) rec.trees = state_.trees;
  return rec;
}

PosteriorDraws Sampler::run(const Eigen::MatrixXd* testScaled) {
  PosteriorDraws draws;
  draws.task = train_.task;
  draws.leafModel = hp_.leafModel;
  draws.covariateRule = hp_.covariateRule;
  draws.treeCount = hp_.trees;
  draws.lambda = lambda_;
  const int retained = hp_.retained();
  const Eigen::Index n = train_.n();
  draws.trainPredictions.resize(retained, n);
  if (testScaled) draws.testPredictions.resize(retained, testScaled->rows());
  std::vector<double> testBuf(testScaled ? static_cast<std::size_t>(testScaled->rows()) : 0);

  auto to_output = [&](double v) {
    return classification_ ? standard_normal_cdf(v) : scaling_.inverse_response(v);
  };

  const int total = hp_.burnIn + hp_.postBurnIn;
  int kept = 0;
  for (int iter = 0; iter < total; ++iter) {
    const MoveCounters before = counters_;
    sweep();
    draws.sigma2Trace.push_back(state_.sigma2);
    const int post = iter - hp_.burnIn;
    if (post < 0 || (post + 1) % hp_.thin != 0 || kept >= retained) continue;
    DrawRecord rec = make_record();
    for (int k = 0; k < kMoveKinds; ++k) {
      rec.moves.proposed[k] = counters_.proposed[k] - before.proposed[k];
      rec.moves.accepted[k] = counters_.accepted[k] - before.accepted[k];
      rec.moves.rejected[k] = counters_.rejected[k] - before.rejected[k];
      rec.moves.invalid[k] = counters_.invalid[k] - before.invalid[k];
    }
    for (Eigen::Index i = 0; i < n; ++i) draws.trainPredictions(kept, i) = to_output(state_.fitTotal[i]);
    if (testScaled) {
      kernels::accumulate_ensemble(state_.trees, *testScaled, testBuf);
      for (Eigen::Index i = 0; i < testScaled->rows(); ++i) {
        draws.testPredictions(kept, i) = to_output(testBuf[static_cast<std::size_t>(i)]);
      }
    }
    draws.records.push_back(std::move(rec));
    ++kept;
  }
  draws.totals = counters_;
  return draws;
}

PosteriorDraws run_regression(const Dataset& train, const ScalingInfo& scaling, const Hyperparams& hp,
                              const Eigen::MatrixXd* testScaled) {
  if (train.task != Task::Regression) throw std::invalid_argument("run_regression: dataset task is not regression");
  Sampler sampler(train, scaling, hp);
  return sampler.run(testScaled);
}

PosteriorDraws run_classification(const Dataset& train, const ScalingInfo& scaling, const Hyperparams& hp,
                                  const Eigen::MatrixXd* testScaled) {
  if (train.task != Task::Classification) {
    throw std::invalid_argument("run_classification: dataset task is not classification");
  }
  Sampler sampler(train, scaling, hp);
  return sampler.run(testScaled);
}

FitResult fit(const Dataset& rawTrain, const Hyperparams& hp, const Eigen::MatrixXd* rawTest) {
  auto [scaled, scaling] = standardize(rawTrain, true);
  std::optional<Eigen::MatrixXd> test;
  if (rawTest) test = scaling.transform_features(*rawTest);
  FitResult out;
  out.scaling = scaling;
  const Eigen::MatrixXd* testPtr = test ? &*test : nullptr;
  out.draws = rawTrain.task == Task::Regression ? run_regression(scaled, scaling, hp, testPtr)
                                                : run_classification(scaled, scaling, hp, testPtr);
  return out;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  // Linear interpolation between order statistics (R type 7).
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

PredictionSummary predict(std::span<const DrawRecord> records, Task task, const Eigen::MatrixXd& rawFeatures,
                          const ScalingInfo& scaling) {
  if (records.empty()) throw std::invalid_argument("predict: no draws");
  if (rawFeatures.cols() != static_cast<Eigen::Index>(scaling.featureCenters.size())) {
    throw std::invalid_argument("predict: expected " + std::to_string(scaling.featureCenters.size()) +
                                " feature columns, got " + std::to_string(rawFeatures.cols()));
  }
  const Eigen::MatrixXd X = scaling.transform_features(rawFeatures);
  const Eigen::Index n = X.rows();
  const auto draws = static_cast<Eigen::Index>(records.size());
  PredictionSummary out;
  out.perDraw.resize(draws, n);
  std::vector<double> buf(static_cast<std::size_t>(n));
  for (Eigen::Index d = 0; d < draws; ++d) {
    const auto& trees = records[static_cast<std::size_t>(d)].trees;
    if (trees.empty()) throw std::invalid_argument("predict: draw has no stored trees");
    kernels::accumulate_ensemble(trees, X, buf);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = buf[static_cast<std::size_t>(i)];
      out.perDraw(d, i) = task == Task::Classification ? standard_normal_cdf(v) : scaling.inverse_response(v);
    }
  }
  out.mean = out.perDraw.colwise().mean();
  out.lower.resize(n);
  out.upper.resize(n);
  std::vector<double> col(static_cast<std::size_t>(draws));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < draws; ++d) col[static_cast<std::size_t>(d)] = out.perDraw(d, i);
    std::sort(col.begin(), col.end());
    out.lower[i] = quantile_sorted(col, 0.05);
    out.upper[i] = quantile_sorted(col, 0.95);
  }
  return out;
}

}  // namespace motr
