// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "motr/benchmark.hpp"
#include "motr/cli.hpp"
#include "motr/draws_io.hpp"
#include "motr/sampler.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace motr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  const auto mx = oracle::moments(rx), my = oracle::moments(ry);
  double cov = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) cov += (rx[i] - mx.mean) * (ry[i] - my.mean);
  cov /= static_cast<double>(rx.size() - 1);
  return cov / std::sqrt(mx.var * my.var);
}

// 1. Closed-form marginals against quadrature.
Outcome marginals_vs_quadrature() {
  Rng rng(20240601);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(3));
    const int q = 1 + static_cast<int>(rng.index(2));
    const oracle::Leaf leaf = oracle::random_leaf(rng, n, q);
    const std::vector<LeafSufficientStats> stats{leaf.stats()};
    const double sigma2 = 0.2 + 1.8 * rng.uniform();

    const double sigmaMu2 = 0.1 + 2.0 * rng.uniform();
    const double bart = std::exp(bart_log_marginal(stats, sigma2, sigmaMu2) + oracle::bart_omitted_log_factor(leaf, sigma2));
    worst = std::max(worst, std::abs(bart / oracle::bart_evidence(leaf, sigma2, sigmaMu2) - 1.0));

    const LinearPrior prior{0.2 + 2.0 * rng.uniform(), 0.2 + 2.0 * rng.uniform()};
    const double motr = std::exp(motr_log_marginal(stats, sigma2, prior) + oracle::motr_omitted_log_factor(leaf));
    worst = std::max(worst, std::abs(motr / oracle::motr_evidence(leaf, sigma2, prior.diagonal(q)) - 1.0));
  }
  return {worst <= 1e-6, "max relative error " + fmt(worst)};
}

// 2. Moments of the conjugate draws.
Outcome conjugate_moments() {
  constexpr int kDraws = 100000;
  Rng rng(77);
  std::vector<std::string> failed;
  auto check = [&](const std::string& name, const std::vector<double>& xs, double mean, double var) {
    if (!oracle::moments_match(xs, mean, var)) failed.push_back(name);
  };

  // mu | r: precision n / sigma2 + 1 / sigmaMu2
  {
    oracle::Leaf leaf;
    leaf.r.resize(4);
    leaf.r << 0.3, -0.1, 0.8, 0.5;
    leaf.Z.resize(4, 0);
    const auto s = leaf.stats();
    const double sigma2 = 0.7, sigmaMu2 = 0.4;
    const double prec = 4.0 / sigma2 + 1.0 / sigmaMu2;
    std::vector<double> xs;
    for (int i = 0; i < kDraws; ++i) xs.push_back(bart_sample_mu(s, sigma2, sigmaMu2, rng));
    check("mu", xs, leaf.r.sum() / sigma2 / prec, 1.0 / prec);
  }
  // beta | r: N(Lambda X'r, sigma2 Lambda)
  {
    Rng data(5);
    const oracle::Leaf leaf = oracle::random_leaf(data, 12, 3);
    const auto s = leaf.stats();
    const double sigma2 = 0.9;
    const LinearPrior prior{0.5, 2.0};
    const Eigen::MatrixXd X = leaf.design();
    Eigen::MatrixXd vinv = Eigen::MatrixXd::Zero(3, 3);
    vinv.diagonal() << 1.0 / 0.5, 1.0 / 2.0, 1.0 / 2.0;
    const Eigen::MatrixXd lambda = (X.transpose() * X + vinv).inverse();
    const Eigen::VectorXd mean = lambda * X.transpose() * leaf.r;
    std::vector<std::vector<double>> xs(3);
    for (int i = 0; i < kDraws; ++i) {
      const Eigen::VectorXd b = motr_sample_beta(s, sigma2, prior, rng);
      for (int k = 0; k < 3; ++k) xs[k].push_back(b(k));
    }
    for (int k = 0; k < 3; ++k) check("beta" + std::to_string(k), xs[k], mean(k), sigma2 * lambda(k, k));
  }
  // sigma2: IG((n + nu) / 2, (S + nu lambda) / 2) with n = 100
  {
    const double shape = (100.0 + 3.0) / 2.0, scale = (90.0 + 3.0 * 0.8) / 2.0;
    const double mean = scale / (shape - 1.0);
    std::vector<double> xs;
    for (int i = 0; i < kDraws; ++i) xs.push_back(sample_sigma2(90.0, 100, 3.0, 0.8, rng));
    check("sigma2", xs, mean, mean * mean / (shape - 2.0));
  }
  // tau_beta0: Gamma(a0 + K / 2, b0 + sum b^2 / (2 sigma2)), rate form
  {
    const std::vector<double> intercepts{0.4, -1.1, 0.7, 0.2, -0.3};
    const double sigma2 = 0.6, a0 = 0.5, b0 = 0.5;
    double ss = 0.0;
    for (double b : intercepts) ss += b * b;
    const double shape = a0 + 2.5, rate = b0 + ss / (2.0 * sigma2);
    std::vector<double> xs;
    for (int i = 0; i < kDraws; ++i) xs.push_back(sample_tau_intercept(intercepts, sigma2, a0, b0, rng));
    check("tau_beta0", xs, shape / rate, shape / (rate * rate));
  }
  // tau_beta over all slopes
  {
    const std::vector<double> slopes{0.2, -0.5, 0.9, 0.05, -0.3, 0.6, 1.2};
    const double sigma2 = 1.3, a1 = 0.5, b1 = 0.5;
    double ss = 0.0;
    for (double b : slopes) ss += b * b;
    const double shape = a1 + 3.5, rate = b1 + ss / (2.0 * sigma2);
    std::vector<double> xs;
    for (int i = 0; i < kDraws; ++i) xs.push_back(sample_tau_slopes(slopes, sigma2, a1, b1, rng));
    check("tau_beta", xs, shape / rate, shape / (rate * rate));
  }

  std::string detail = "mu, beta, sigma2, tau_beta0, tau_beta";
  if (!failed.empty()) {
    detail = "mismatch:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

BenchmarkGrid friedman_desk_grid() {
  BenchmarkGrid grid;
  grid.scenarios = {FriedmanSpec{500, 5, 1.0, 1}};
  grid.replicates = 5;
  grid.seed = 1;

  Hyperparams motrHp;
  motrHp.trees = 10;
  motrHp.burnIn = 500;
  motrHp.postBurnIn = 1000;
  motrHp.leafModel = LeafModel::Linear;
  motrHp.branching = Branching::Dirichlet;
  motrHp.precisionMode = PrecisionMode::InterceptSlope;

  Hyperparams bartHp = motrHp;
  bartHp.leafModel = LeafModel::Constant;
  bartHp.branching = Branching::Uniform;

  grid.algorithms = {{"MOTR-BART", motrHp}, {"BART", bartHp}};
  return grid;
}

// 3. Desk-scale Friedman medians.
Outcome friedman_medians(const BenchmarkResult& result) {
  const SummaryRow& motr = result.rows.at(0);
  const SummaryRow& bart = result.rows.at(1);
  const bool complete = motr.failures == 0 && bart.failures == 0;
  const bool pass = complete && motr.median >= 0.95 && motr.median <= 1.45 && bart.median >= 1.25 &&
                    bart.median <= 1.75 && motr.median < bart.median;
  return {pass, "MOTR-BART median " + fmt(motr.median) + " (" + fmt(motr.q1) + ";" + fmt(motr.q3) + "), BART median " +
                    fmt(bart.median) + " (" + fmt(bart.q1) + ";" + fmt(bart.q3) + ")"};
}

// 4. Nothing beats the noise.
Outcome noise_floor(const BenchmarkResult& result) {
  double lowest = std::numeric_limits<double>::infinity();
  bool allOk = true;
  for (const CellResult& cell : result.cells) {
    allOk = allOk && cell.ok;
    if (cell.ok) lowest = std::min(lowest, cell.rmse);
  }
  return {allOk && lowest >= 0.85, "smallest test RMSE " + fmt(lowest)};
}

// 5. Tree sizes on the criterion-3 runs, and the count identity on stored trees.
Outcome tree_sizes(const BenchmarkResult& result, const BenchmarkGrid& grid) {
  double motrParams = 0.0, bartTerminals = 0.0;
  int motrRuns = 0, bartRuns = 0;
  for (const CellResult& cell : result.cells) {
    if (!cell.ok) continue;
    if (cell.algorithm == 0) {
      motrParams += cell.params.meanPerTree;
      ++motrRuns;
    } else {
      bartTerminals += cell.params.meanTerminalsPerTree;
      ++bartRuns;
    }
  }
  motrParams /= std::max(motrRuns, 1);
  bartTerminals /= std::max(bartRuns, 1);

  Hyperparams hp = grid.algorithms[0].hp;
  hp.storeTrees = true;
  const FitResult fitted = fit(friedman_generate(grid.scenarios[0]), hp);
  const ParameterSummary s = parameter_accounting(fitted.draws.records);
  double fromTrees = 0.0;
  bool perTree = true;
  for (const DrawRecord& rec : fitted.draws.records) {
    for (std::size_t t = 0; t < rec.trees.size(); ++t) {
      const auto count = leaf_parameter_count(rec.trees[t], hp.leafModel, hp.covariateRule);
      perTree = perTree && static_cast<std::size_t>(rec.parameterCounts[t]) == count;
      fromTrees += static_cast<double>(count);
    }
  }
  const bool identity = perTree && s.total == fromTrees;

  const bool pass = motrRuns > 0 && bartRuns > 0 && bartTerminals >= 2.0 && bartTerminals <= 6.0 && motrParams >= 4.0 &&
                    motrParams <= 10.0 && identity;
  return {pass, "BART terminals per tree " + fmt(bartTerminals) + ", MOTR-BART parameters per tree " + fmt(motrParams) +
                    ", count identity " + (identity ? "holds" : "broken")};
}

// 6. Five leaves, two split covariates, linear leaves.
Outcome fifteen_parameters() {
  Tree tree;
  const auto [a, b] = tree.grow(0, SplitRule{1, 0.0});
  tree.grow(a, SplitRule{0, 0.0});
  const auto [c, d] = tree.grow(b, SplitRule{1, 1.0});
  (void)c;
  tree.grow(d, SplitRule{0, 2.0});
  const std::size_t count = leaf_parameter_count(tree, LeafModel::Linear, CovariateRule::TreeSplits);
  return {tree.terminal_count() == 5 && count == 15, std::to_string(count) + " parameters"};
}

// 7. Probit data with one covariate.
Outcome probit_sanity() {
  Rng rng(2020);
  Dataset d;
  d.task = Task::Classification;
  d.features.resize(500, 1);
  d.response.resize(500);
  for (Eigen::Index i = 0; i < 500; ++i) {
    const double x = rng.normal();
    d.features(i, 0) = x;
    d.response(i) = 2.0 * x + rng.normal() > 0.0 ? 1.0 : 0.0;
  }
  d.featureNames = {"x"};

  Hyperparams hp;
  hp.burnIn = 500;
  hp.postBurnIn = 1000;
  hp.seed = 1;
  const FitResult fitted = fit(d, hp);
  const Eigen::MatrixXd& probs = fitted.draws.trainPredictions;
  const bool open = probs.minCoeff() > 0.0 && probs.maxCoeff() < 1.0;
  bool unitSigma = true;
  for (const DrawRecord& rec : fitted.draws.records) unitSigma = unitSigma && rec.sigma2 == 1.0;
  const Eigen::VectorXd mean = fitted.draws.train_mean();
  const double rho = spearman({d.features.data(), d.features.data() + 500}, {mean.data(), mean.data() + 500});
  return {rho > 0.9 && open && unitSigma, "rank correlation " + fmt(rho) + ", probabilities in (" + fmt(probs.minCoeff()) +
                                              ", " + fmt(probs.maxCoeff()) + "), sigma2 " +
                                              (unitSigma ? "fixed at 1" : "moved")};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8. Two identical train commands.
Outcome determinism() {
  const fs::path dir = fs::current_path() / "acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ostringstream out, err;
  const std::string data = (dir / "friedman.csv").string();
  int code = run_cli({"simulate", "--n", "300", "--p", "5", "--seed", "8", "--out", data}, out, err);
  for (const char* run : {"a", "b"}) {
    code |= run_cli({"train", "--data", data, "--burnin", "100", "--iters", "200", "--seed", "42", "--store-trees", "--out",
                     (dir / run).string()},
                    out, err);
  }
  if (code != 0) return {false, "train failed: " + err.str()};
  const std::string a = slurp(dir / "a" / "draws.jsonl"), b = slurp(dir / "b" / "draws.jsonl");
  return {!a.empty() && a == b, std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different")};
}

// 9. Residual identity after every sweep.
Outcome residual_identity() {
  const Dataset raw = friedman_generate({300, 5, 1.0, 12});
  const auto [train, scaling] = standardize(raw, true);
  double worst = 0.0;
  for (LeafModel model : {LeafModel::Constant, LeafModel::Linear}) {
    Hyperparams hp;
    hp.leafModel = model;
    hp.burnIn = 100;
    hp.postBurnIn = 100;
    Sampler sampler(train, scaling, hp);
    for (int it = 0; it < 200; ++it) {
      sampler.sweep();
      worst = std::max(worst, sampler.residual_identity_error());
    }
  }
  return {worst <= 1e-8, "max violation " + fmt(worst)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, auto&& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = body();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!outcome.pass) ++failures;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " " << id << " " << name << ": " << outcome.detail << " ["
              << fmt(secs, 3) << "s]" << std::endl;
  };

  report(1, "marginals match quadrature", marginals_vs_quadrature);
  report(2, "conjugate draw moments", conjugate_moments);

  const BenchmarkGrid grid = friedman_desk_grid();
  BenchmarkResult desk;
  const auto start = std::chrono::steady_clock::now();
  try {
    desk = run_benchmark(grid);
  } catch (const std::exception& e) {
    std::cout << "benchmark grid failed: " << e.what() << std::endl;
  }
  const double gridSecs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "friedman desk grid ran in " << fmt(gridSecs, 3) << "s" << std::endl;
  report(3, "friedman desk-scale medians", [&] { return friedman_medians(desk); });
  report(4, "noise floor", [&] { return noise_floor(desk); });
  report(5, "tree size accounting", [&] { return tree_sizes(desk, grid); });

  report(6, "fifteen-parameter tree", fifteen_parameters);
  report(7, "probit sanity", probit_sanity);
  report(8, "train determinism", determinism);
  report(9, "residual identity", residual_identity);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
