#include "motr/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "motr/benchmark.hpp"
#include "motr/draws_io.hpp"

namespace motr {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"data", c.data}, {"target", c.target}, {"task", to_string(c.task)}, {"hyperparams", c.hp}, {"out", c.out}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  RunConfig d;
  c.data = j.value("data", d.data);
  c.target = j.value("target", d.target);
  c.task = parse_task(j.value("task", to_string(d.task)));
  c.hp = j.contains("hyperparams") ? j["hyperparams"].get<Hyperparams>() : d.hp;
  c.out = j.value("out", d.out);
}

namespace {

class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "TRUE") return true;
  if (text == "false" || text == "0" || text == "no" || text == "FALSE") return false;
  throw CommandError("expected true/false, got '" + text + "'");
}

void set_jobs(int jobs) {
  if (jobs >= 1) omp_set_num_threads(jobs);
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  long n = 200;
  int p = 5;
  double noiseSd = 1.0;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.p < 5) throw CommandError("p must be >= 5");
  if (a.n < 2) throw CommandError("n must be >= 2");
  FriedmanSpec spec{a.n, a.p, a.noiseSd, a.seed};
  const Dataset data = friedman_generate(spec);
  write_csv(a.out, data, "y");
  out << "wrote " << data.n() << " rows x " << (data.p() + 1) << " columns to " << a.out << '\n';
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainFlags {
  std::string config;
  std::string data, target = "y", task = "regression", leaf = "linear", covariateRule = "tree-splits",
              branching = "auto", varsInterSlope = "true", out = "run";
  int trees = 10, burnIn = 1000, iters = 5000, thin = 1, nMin = 5, jobs = 0;
  double alpha = 0.95, betaDepth = 2.0, nu = 3.0, lambda = 0.0, c = 2.0, tauB = 0.0;
  std::uint64_t seed = 1;
  bool storeTrees = false, transitionCorrection = false;
};

RunConfig resolve_train_config(const CLI::App& sub, const TrainFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) {
    const nlohmann::json j = read_json_file(f.config);
    cfg = j.contains("config") ? j["config"].get<RunConfig>() : j.get<RunConfig>();
  }
  auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
  if (given("--data")) cfg.data = f.data;
  if (given("--target")) cfg.target = f.target;
  if (given("--task")) cfg.task = parse_task(f.task);
  if (given("--out")) cfg.out = f.out;
  Hyperparams& hp = cfg.hp;
  if (given("--leaf")) hp.leafModel = parse_leaf_model(f.leaf);
  if (given("--trees")) hp.trees = f.trees;
  if (given("--burnin")) hp.burnIn = f.burnIn;
  if (given("--iters")) hp.postBurnIn = f.iters;
  if (given("--thin")) hp.thin = f.thin;
  if (given("--alpha")) hp.alpha = f.alpha;
  if (given("--beta-depth")) hp.betaDepth = f.betaDepth;
  if (given("--nu")) hp.nu = f.nu;
  if (given("--lambda")) hp.lambda = f.lambda;
  if (given("--c")) hp.c = f.c;
  if (given("--covariate-rule")) hp.covariateRule = parse_covariate_rule(f.covariateRule);
  if (given("--branching")) hp.branching = f.branching == "auto" ? std::nullopt : std::optional(parse_branching(f.branching));
  if (given("--vars-inter-slope")) {
    hp.precisionMode = parse_bool(f.varsInterSlope) ? PrecisionMode::InterceptSlope : PrecisionMode::FixedTauB;
  }
  if (given("--tau-b")) hp.tauB = f.tauB;
  if (given("--nmin")) hp.nMin = f.nMin;
  if (given("--seed")) hp.seed = f.seed;
  if (given("--store-trees")) hp.storeTrees = f.storeTrees;
  if (given("--transition-correction")) hp.transitionCorrection = f.transitionCorrection;
  if (cfg.data.empty()) throw CommandError("--data is required");
  hp.validate();
  return cfg;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const Dataset raw = load_csv(cfg.data, cfg.target, cfg.task);
  FitResult fitted = fit(raw, cfg.hp);
  const PosteriorDraws& draws = fitted.draws;

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  write_draws_jsonl(dir / "draws.jsonl", draws.records);
  write_sigma2_trace(dir / "sigma2_trace.csv", draws.sigma2Trace);

  RunMetadata meta;
  meta.task = cfg.task;
  meta.target = cfg.target;
  meta.dataPath = cfg.data;
  meta.featureNames = raw.featureNames;
  meta.scaling = fitted.scaling;
  meta.hyperparams = cfg.hp;
  meta.lambda = draws.lambda;
  meta.burnIn = cfg.hp.burnIn;
  meta.retained = static_cast<int>(draws.records.size());
  if (draws.trainPredictions.rows() > 0) {
    const Eigen::VectorXd mean = draws.train_mean();
    meta.trainMeanPrediction.assign(mean.data(), mean.data() + mean.size());
  }
  nlohmann::json metaJson = meta;
  metaJson["config"] = cfg;
  write_json_file(dir / "metadata.json", metaJson);

  out << "trained " << to_string(cfg.hp.leafModel) << "-leaf ensemble (" << cfg.hp.trees << " trees, "
      << to_string(cfg.task) << ") on " << raw.n() << " rows; " << draws.records.size() << " draws written to "
      << (dir / "draws.jsonl").string() << '\n';
  return 0;
}

// ---- predict ----------------------------------------------------------------

fs::path sibling_metadata(const std::string& drawsPath, const std::string& explicitPath) {
  if (!explicitPath.empty()) return explicitPath;
  return fs::path(drawsPath).parent_path() / "metadata.json";
}

int cmd_predict(const std::string& drawsPath, const std::string& metaPath, const std::string& dataPath,
                const std::string& outPath, std::ostream& out) {
  const RunMetadata meta = read_json_file(sibling_metadata(drawsPath, metaPath)).get<RunMetadata>();
  const auto records = read_draws_jsonl(drawsPath);
  if (records.empty()) throw CommandError("draws file " + drawsPath + " is empty");
  for (const auto& rec : records) {
    if (rec.trees.empty()) {
      throw CommandError("draws file " + drawsPath + " has no stored trees; re-run train with --store-trees");
    }
  }
  const NumericTable table = read_numeric_csv(dataPath);
  std::vector<std::size_t> columns;
  std::size_t position = 0;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c] == meta.target) continue;
    if (position >= meta.featureNames.size()) {
      throw CommandError("unexpected extra column '" + table.header[c] + "' in " + dataPath);
    }
    if (table.header[c] != meta.featureNames[position]) {
      throw CommandError("column '" + table.header[c] + "' at feature position " + std::to_string(position + 1) +
                         " does not match training column '" + meta.featureNames[position] + "'");
    }
    columns.push_back(c);
    ++position;
  }
  if (position != meta.featureNames.size()) {
    throw CommandError("missing column '" + meta.featureNames[position] + "' in " + dataPath);
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (std::size_t k = 0; k < columns.size(); ++k) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = table.rows[i][columns[k]];
    }
  }
  const PredictionSummary pred = predict(records, meta.task, X, meta.scaling);
  std::ofstream file(outPath, std::ios::binary);
  if (!file) throw CommandError("cannot write " + outPath);
  file << "row," << (meta.task == Task::Classification ? "probability" : "mean") << ",lower_5,upper_95\n"
       << std::setprecision(17);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    file << (i + 1) << ',' << pred.mean[i] << ',' << pred.lower[i] << ',' << pred.upper[i] << '\n';
  }
  if (!file) throw CommandError("failed writing " + outPath);
  out << "wrote " << X.rows() << " predictions from " << records.size() << " draws to " << outPath << '\n';
  return 0;
}

// ---- benchmark --------------------------------------------------------------

int cmd_benchmark(const CLI::App& sub, const std::string& configPath, const std::string& outDir, int replicates,
                  int jobs, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  BenchmarkGrid grid = grid_from_json(read_json_file(configPath));
  if (sub.get_option("--replicates")->count() > 0) grid.replicates = replicates;
  if (sub.get_option("--jobs")->count() > 0) grid.jobs = jobs;
  if (sub.get_option("--seed")->count() > 0) grid.seed = seed;
  if (grid.replicates < 1) throw CommandError("replicates must be >= 1");
  const fs::path dir(outDir);
  fs::create_directories(dir);
  if (!grid.drawsDir) grid.drawsDir = dir / "runs";
  write_json_file(dir / "benchmark_config.json", grid_to_json(grid));

  const BenchmarkResult result = run_benchmark(grid);
  for (const auto& cell : result.cells) {
    if (!cell.ok) {
      err << "cell failed (" << scenario_label(grid.scenarios[cell.scenario]) << ", "
          << grid.algorithms[cell.algorithm].name << ", replicate " << (cell.replicate + 1) << "): " << cell.error
          << '\n';
    }
  }
  write_rmse_table(dir / "rmse_table.csv", result);
  write_param_counts(dir / "param_counts.csv", result);
  out << render_text_table(result);
  return 0;
}

// ---- diagnostics ------------------------------------------------------------

int cmd_diagnostics(const std::string& drawsPath, const std::string& metaPath, const std::string& traceOut,
                    std::ostream& out) {
  const auto records = read_draws_jsonl(drawsPath);
  if (records.empty()) throw CommandError("draws file " + drawsPath + " contains no draws");
  std::optional<RunMetadata> meta;
  const fs::path mp = sibling_metadata(drawsPath, metaPath);
  if (fs::exists(mp)) meta = read_json_file(mp).get<RunMetadata>();

  bool classification = meta ? meta->task == Task::Classification : false;
  if (!meta) {
    classification = std::all_of(records.begin(), records.end(), [](const DrawRecord& r) { return r.sigma2 == 1.0; });
  }
  out << std::fixed << std::setprecision(4);
  out << "draws: " << records.size() << " retained iterations\n";
  if (classification) {
    out << "sigma2: fixed at 1\n";
  } else {
    double mean = 0.0;
    for (const auto& r : records) mean += r.sigma2;
    mean /= static_cast<double>(records.size());
    double ss = 0.0;
    for (const auto& r : records) ss += (r.sigma2 - mean) * (r.sigma2 - mean);
    const double sd = records.size() > 1 ? std::sqrt(ss / static_cast<double>(records.size() - 1)) : 0.0;
    out << std::setprecision(6) << "sigma2 (internal scale): mean " << mean << ", sd " << sd << '\n' << std::setprecision(4);
    if (meta && meta->scaling.responseScaled) {
      const double s2 = meta->scaling.responseScale * meta->scaling.responseScale;
      out << "sigma2 (original scale): mean " << mean * s2 << ", sd " << sd * s2 << '\n';
    }
  }
  MoveCounters totals;
  for (const auto& r : records) totals += r.moves;
  out << "acceptance rates (post burn-in):\n";
  for (int k = 0; k < kMoveKinds; ++k) {
    const double proposed = static_cast<double>(totals.proposed[k]);
    const double rate = proposed > 0 ? totals.accepted[k] / proposed : 0.0;
    const double invalid = proposed > 0 ? totals.invalid[k] / proposed : 0.0;
    out << "  " << std::left << std::setw(7) << to_string(static_cast<MoveKind>(k)) << std::right
        << " proposed " << totals.proposed[k] << ", accepted " << rate << ", invalid " << invalid << '\n';
  }
  const ParameterSummary params = parameter_accounting(records);
  out << "mean terminal nodes per tree: " << params.meanTerminalsPerTree << '\n';
  out << "mean parameters per tree: " << params.meanPerTree << '\n';
  out << std::setprecision(1) << "total parameters over retained draws: " << params.total << '\n';
  if (!traceOut.empty()) {
    std::vector<double> trace;
    for (const auto& r : records) trace.push_back(r.sigma2);
    write_sigma2_trace(traceOut, trace);
    out << "sigma2 trace written to " << traceOut << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian additive regression trees with constant or linear leaves"};
  app.require_subcommand(1);
  app.allow_extras(false);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Write a Friedman benchmark dataset as CSV");
  simulate->add_option("--n", sim.n, "Rows")->required();
  simulate->add_option("--p", sim.p, "Columns (>= 5)")->required();
  simulate->add_option("--seed", sim.seed, "Random seed")->required();
  simulate->add_option("--noise-sd", sim.noiseSd, "Noise standard deviation");
  simulate->add_option("--out", sim.out, "Output CSV path")->required();

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "Run the MCMC sampler on a CSV dataset");
  train->add_option("--config", tf.config, "RunConfig or metadata.json to start from");
  train->add_option("--data", tf.data, "Training CSV");
  train->add_option("--target", tf.target, "Response column");
  train->add_option("--task", tf.task, "regression | classification");
  train->add_option("--leaf", tf.leaf, "constant | linear");
  train->add_option("--trees", tf.trees, "Number of trees");
  train->add_option("--burnin", tf.burnIn, "Burn-in iterations");
  train->add_option("--iters", tf.iters, "Post-burn-in iterations");
  train->add_option("--thin", tf.thin, "Keep every k-th post-burn-in draw");
  train->add_option("--alpha", tf.alpha, "Tree prior alpha");
  train->add_option("--beta-depth", tf.betaDepth, "Tree prior beta");
  train->add_option("--nu", tf.nu, "sigma2 prior degrees of freedom");
  train->add_option("--lambda", tf.lambda, "sigma2 prior scale (calibrated when omitted)");
  train->add_option("--c", tf.c, "Leaf prior spread constant in [1,3]");
  train->add_option("--covariate-rule", tf.covariateRule, "tree-splits | ancestors");
  train->add_option("--branching", tf.branching, "auto | uniform | dirichlet");
  train->add_option("--vars-inter-slope", tf.varsInterSlope, "Estimate intercept/slope precisions (true|false)");
  train->add_option("--tau-b", tf.tauB, "Fixed coefficient precision (default: tree count)");
  train->add_option("--nmin", tf.nMin, "Minimum rows per terminal node");
  train->add_option("--seed", tf.seed, "Random seed");
  train->add_option("--out", tf.out, "Output directory");
  train->add_option("--jobs", tf.jobs, "OpenMP threads for row kernels");
  train->add_flag("--store-trees", tf.storeTrees, "Store every retained ensemble (needed by predict)");
  train->add_flag("--transition-correction", tf.transitionCorrection, "Include grow/prune proposal ratio in MH");

  std::string pDraws, pMeta, pData, pOut = "predictions.csv";
  int pJobs = 0;
  auto* pred = app.add_subcommand("predict", "Posterior predictions for new rows");
  pred->add_option("--draws", pDraws, "draws.jsonl from train --store-trees")->required();
  pred->add_option("--metadata", pMeta, "metadata.json (default: next to the draws file)");
  pred->add_option("--data", pData, "CSV with the training feature columns")->required();
  pred->add_option("--out", pOut, "Output CSV");
  pred->add_option("--jobs", pJobs, "OpenMP threads for row kernels");

  std::string bConfig, bOut = "benchmark_out";
  int bReplicates = 10, bJobs = 1;
  std::uint64_t bSeed = 1;
  auto* bench = app.add_subcommand("benchmark", "Run a Friedman benchmark grid");
  bench->add_option("--config", bConfig, "Grid config JSON")->required();
  bench->add_option("--out", bOut, "Output directory");
  bench->add_option("--replicates", bReplicates, "Override replicate count");
  bench->add_option("--jobs", bJobs, "Concurrent grid cells");
  bench->add_option("--seed", bSeed, "Override master seed");

  std::string dDraws, dMeta, dTrace;
  auto* diag = app.add_subcommand("diagnostics", "Summarize a draws file");
  diag->add_option("--draws", dDraws, "draws.jsonl")->required();
  diag->add_option("--metadata", dMeta, "metadata.json (default: next to the draws file)");
  diag->add_option("--trace-out", dTrace, "Write the retained sigma2 trace as CSV");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, out);
    if (train->parsed()) {
      set_jobs(tf.jobs);
      return cmd_train(resolve_train_config(*train, tf), out);
    }
    if (pred->parsed()) {
      set_jobs(pJobs);
      return cmd_predict(pDraws, pMeta, pData, pOut, out);
    }
    if (bench->parsed()) return cmd_benchmark(*bench, bConfig, bOut, bReplicates, bJobs, bSeed, out, err);
    if (diag->parsed()) return cmd_diagnostics(dDraws, dMeta, dTrace, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace motr
