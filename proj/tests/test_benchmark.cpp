#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "motr/benchmark.hpp"
#include "motr/draws_io.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace motr;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "motr_test_benchmark" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<double> as_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("friedman signal at fixed points") {
  const std::vector<double> half(5, 0.5), zero(5, 0.0), one(5, 1.0);
  CHECK(friedman_signal(half) == doctest::Approx(10.0 * std::sin(std::numbers::pi / 4.0) + 7.5));
  CHECK(friedman_signal(half) == doctest::Approx(14.5711).epsilon(1e-5));
  CHECK(friedman_signal(zero) == doctest::Approx(5.0));
  CHECK(friedman_signal(one) == doctest::Approx(20.0));
}

TEST_CASE("friedman_generate draws the documented model") {
  const Dataset d = friedman_generate({300, 7, 0.0, 4});
  CHECK(d.n() == 300);
  CHECK(d.p() == 7);
  CHECK(d.featureNames.front() == "x1");
  CHECK(d.featureNames.back() == "x7");
  CHECK(d.features.minCoeff() >= 0.0);
  CHECK(d.features.maxCoeff() < 1.0);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const Eigen::RowVectorXd x = d.features.row(i);
    CHECK(d.response(i) == friedman_signal(x));
  }
  // uniform columns: mean 1/2, variance 1/12
  for (Eigen::Index j = 0; j < d.p(); ++j) {
    const auto m = oracle::moments(as_vector(d.features.col(j)));
    CHECK(std::abs(m.mean - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / 300.0));
  }
  CHECK_THROWS_WITH(friedman_generate({10, 4, 1.0, 1}), doctest::Contains("p must be >= 5"));

  const Dataset again = friedman_generate({300, 7, 0.0, 4});
  CHECK(again.features == d.features);
}

TEST_CASE("noise level is recoverable from the true signal") {
  const Dataset d = friedman_generate({20000, 5, 1.0, 9});
  std::vector<double> truth;
  for (Eigen::Index i = 0; i < d.n(); ++i) truth.push_back(friedman_signal(Eigen::RowVectorXd(d.features.row(i))));
  const double err = rmse(truth, as_vector(d.response));
  // RMSE^2 is a mean of chi2_1 / n: sd of RMSE about 1 / sqrt(2n)
  CHECK(std::abs(err - 1.0) < 4.0 / std::sqrt(2.0 * 20000.0));
}

TEST_CASE("rmse") {
  const std::vector<double> a{1.0, 2.0, 3.0};
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(std::vector<double>{0.0, 0.0}, std::vector<double>{3.0, 4.0}) == doctest::Approx(std::sqrt(12.5)));
  CHECK(rmse(std::vector<double>{0.0, 0.0}, std::vector<double>{3.0, 4.0}) == doctest::Approx(3.5355).epsilon(1e-4));
  CHECK(rmse(std::vector<double>{1.5, 2.5, 3.5}, a) == doctest::Approx(0.5));
  CHECK_THROWS_AS(rmse(a, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("quantile and table formatting") {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile(v, 0.75) == doctest::Approx(3.25));
  CHECK(quantile({7.0}, 0.3) == 7.0);
  CHECK(format_rmse_cell(1.1234, 1.108, 1.19) == "1.12 (1.11;1.19)");
}

TEST_CASE("parameter accounting") {
  std::vector<DrawRecord> records(5000);
  for (auto& rec : records) {
    rec.parameterCounts.assign(10, 1);
    rec.terminalCounts.assign(10, 1);
  }
  ParameterSummary s = parameter_accounting(records);
  CHECK(s.total == 50000.0);
  CHECK(s.meanPerIteration == 10.0);
  CHECK(s.sdPerIteration == 0.0);
  CHECK(s.meanPerTree == 1.0);

  // one tree, five leaves, two split covariates, linear leaves
  Tree tree;
  const auto [a, b] = tree.grow(0, SplitRule{1, 0.0});
  tree.grow(a, SplitRule{0, 0.0});
  const auto [c, d] = tree.grow(b, SplitRule{1, 1.0});
  tree.grow(d, SplitRule{0, 2.0});
  (void)c;
  DrawRecord one;
  one.parameterCounts = {static_cast<int>(leaf_parameter_count(tree, LeafModel::Linear, CovariateRule::TreeSplits))};
  one.terminalCounts = {static_cast<int>(tree.terminal_count())};
  s = parameter_accounting(std::span(&one, 1));
  CHECK(s.total == 15.0);
  CHECK(s.meanTerminalsPerTree == 5.0);
}

TEST_CASE("parameter totals match serialized trees") {
  const Dataset raw = friedman_generate({150, 5, 1.0, 2});
  Hyperparams hp;
  hp.burnIn = 20;
  hp.postBurnIn = 30;
  hp.storeTrees = true;
  const FitResult fitted = fit(raw, hp);
  const ParameterSummary s = parameter_accounting(fitted.draws.records);
  double fromTrees = 0.0, terminals = 0.0;
  for (const DrawRecord& rec : fitted.draws.records) {
    for (const Tree& t : rec.trees) {
      fromTrees += static_cast<double>(leaf_parameter_count(t, hp.leafModel, hp.covariateRule));
      terminals += static_cast<double>(t.terminal_count());
    }
  }
  CHECK(s.total == fromTrees);
  CHECK(s.totalTerminals == terminals);
  CHECK(s.meanPerTree == fromTrees / (30.0 * hp.trees));
}

TEST_CASE("small grid: shape, quartile order, determinism") {
  const nlohmann::json config = {
      {"scenarios", {{{"n", 120}, {"p", 5}}, {{"n", 100}, {"p", 6}}}},
      {"replicates", 3},
      {"seed", 5},
      {"defaults", {{"burnin", 20}, {"iters", 30}}},
      {"algorithms", {{{"name", "MOTR-BART"}, {"leaf", "linear"}}, {{"name", "BART"}, {"leaf", "constant"}}}}};
  BenchmarkGrid grid = grid_from_json(config);
  CHECK(grid.algorithms[0].hp.burnIn == 20);
  CHECK(grid.algorithms[1].hp.leafModel == LeafModel::Constant);
  CHECK(grid_from_json(grid_to_json(grid)).algorithms.size() == 2);

  const BenchmarkResult a = run_benchmark(grid);
  CHECK(a.cells.size() == 12);
  REQUIRE(a.rows.size() == 4);
  for (const auto& row : a.rows) {
    CHECK(row.runs == 3);
    CHECK(row.failures == 0);
    CHECK(row.q1 <= row.median);
    CHECK(row.median <= row.q3);
  }
  CHECK(a.rows[0].scenario == "n=120,p=5");

  grid.jobs = 3;
  const BenchmarkResult b = run_benchmark(grid);
  for (std::size_t i = 0; i < a.cells.size(); ++i) CHECK(a.cells[i].rmse == b.cells[i].rmse);

  const fs::path dir = scratch_dir("tables");
  write_rmse_table(dir / "rmse_table.csv", a);
  write_param_counts(dir / "param_counts.csv", a);
  std::ifstream in(dir / "rmse_table.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 5);
  CHECK(render_text_table(a).find("MOTR-BART") != std::string::npos);
}

TEST_CASE("external predictions") {
  const fs::path dir = scratch_dir("external");
  const Dataset test = friedman_generate({50, 5, 1.0, 3});

  {
    std::ofstream out(dir / "exact.csv");
    out.precision(17);
    out << "prediction\n";
    for (Eigen::Index i = 0; i < test.n(); ++i) out << test.response(i) << "\n";
  }
  const ExternalEntry exact = ingest_external_predictions(dir / "exact.csv", test);
  CHECK(exact.label == "exact");
  CHECK(exact.rmse == 0.0);

  {
    std::ofstream out(dir / "short.csv");
    for (Eigen::Index i = 0; i + 1 < test.n(); ++i) out << 0.0 << "\n";
  }
  CHECK_THROWS_WITH(ingest_external_predictions(dir / "short.csv", test), doctest::Contains("does not match"));
  CHECK_THROWS(ingest_external_predictions(dir / "missing.csv", test));
}

TEST_CASE("constant predictor RMSE equals the signal's spread") {
  // Var f(x) by Monte Carlo over 10^6 uniform draws.
  Rng rng(99);
  double sum = 0.0, sumsq = 0.0;
  const int draws = 1000000;
  std::vector<double> x(5);
  for (int i = 0; i < draws; ++i) {
    for (double& v : x) v = rng.uniform();
    const double f = friedman_signal(x);
    sum += f;
    sumsq += f * f;
  }
  const double mcMean = sum / draws;
  const double mcSd = std::sqrt(sumsq / draws - mcMean * mcMean);

  const Dataset all = friedman_generate({20000, 5, 0.0, 21});
  const auto [train, test] = train_test_split(all, 0.5, 3);
  const fs::path dir = scratch_dir("constant");
  {
    std::ofstream out(dir / "train_mean.csv");
    out.precision(17);
    const double m = train.response.mean();
    for (Eigen::Index i = 0; i < test.n(); ++i) out << m << "\n";
  }
  const ExternalEntry entry = ingest_external_predictions(dir / "train_mean.csv", test);
  CHECK(entry.rmse == doctest::Approx(mcSd).epsilon(0.02));
}
