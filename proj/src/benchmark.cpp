#include "motr/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "motr/draws_io.hpp"

namespace motr {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 finalizer over a running combination.
  std::uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Dataset friedman_generate(const FriedmanSpec& spec) {
  if (spec.p < 5) throw std::invalid_argument("p must be >= 5");
  if (spec.n < 2) throw std::invalid_argument("n must be >= 2");
  Rng rng(spec.seed, 0x667269656400ULL);
  Dataset data;
  data.task = Task::Regression;
  data.features.resize(spec.n, spec.p);
  data.response.resize(spec.n);
  for (int j = 0; j < spec.p; ++j) data.featureNames.push_back("x" + std::to_string(j + 1));
  std::vector<double> row(static_cast<std::size_t>(spec.p));
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.p; ++j) {
      row[static_cast<std::size_t>(j)] = rng.uniform();
      data.features(i, j) = row[static_cast<std::size_t>(j)];
    }
    const double noise = spec.noiseSd > 0.0 ? spec.noiseSd * rng.normal() : 0.0;
    data.response[i] = friedman_signal(row) + noise;
  }
  return data;
}

double rmse(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size()) {
    throw std::invalid_argument("rmse: length mismatch (" + std::to_string(predicted.size()) + " vs " +
                                std::to_string(observed.size()) + ")");
  }
  if (predicted.empty()) throw std::invalid_argument("rmse: empty input");
  double ss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - observed[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(predicted.size()));
}

ParameterSummary parameter_accounting(std::span<const DrawRecord> records) {
  ParameterSummary s;
  s.iterations = static_cast<long>(records.size());
  if (records.empty()) return s;
  s.trees = static_cast<int>(records.front().parameterCounts.size());
  std::vector<double> perIter;
  perIter.reserve(records.size());
  for (const auto& rec : records) {
    double it = 0.0;
    for (int c : rec.parameterCounts) it += c;
    for (int c : rec.terminalCounts) s.totalTerminals += c;
    perIter.push_back(it);
    s.total += it;
  }
  s.meanPerIteration = s.total / static_cast<double>(perIter.size());
  double ss = 0.0;
  for (double v : perIter) ss += (v - s.meanPerIteration) * (v - s.meanPerIteration);
  s.sdPerIteration = perIter.size() > 1 ? std::sqrt(ss / static_cast<double>(perIter.size() - 1)) : 0.0;
  const double slots = static_cast<double>(s.iterations) * s.trees;
  s.meanPerTree = s.total / slots;
  s.meanTerminalsPerTree = s.totalTerminals / slots;
  return s;
}

std::string scenario_label(const FriedmanSpec& spec) {
  return "n=" + std::to_string(spec.n) + ",p=" + std::to_string(spec.p);
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BenchmarkGrid grid_from_json(const nlohmann::json& j) {
  BenchmarkGrid grid;
  grid.replicates = j.value("replicates", grid.replicates);
  grid.testFraction = j.value("test_fraction", grid.testFraction);
  grid.seed = j.value("seed", grid.seed);
  grid.jobs = j.value("jobs", grid.jobs);
  if (j.contains("draws_dir") && !j["draws_dir"].is_null()) grid.drawsDir = j["draws_dir"].get<std::string>();
  for (const auto& s : j.at("scenarios")) {
    FriedmanSpec spec;
    spec.n = s.value("n", spec.n);
    spec.p = s.value("p", spec.p);
    spec.noiseSd = s.value("noise_sd", spec.noiseSd);
    spec.seed = s.value("seed", spec.seed);
    grid.scenarios.push_back(spec);
  }
  // Shared defaults apply to every algorithm before its own overrides.
  const nlohmann::json shared = j.value("defaults", nlohmann::json::object());
  for (const auto& a : j.at("algorithms")) {
    nlohmann::json merged = shared;
    merged.update(a);
    EngineConfig cfg;
    cfg.name = a.at("name").get<std::string>();
    merged.erase("name");
    cfg.hp = merged.get<Hyperparams>();
    cfg.hp.validate();
    grid.algorithms.push_back(cfg);
  }
  if (j.contains("external")) {
    for (const auto& e : j["external"]) {
      ExternalPredictionSpec spec;
      spec.predictions = e.at("predictions").get<std::string>();
      spec.testData = e.at("test").get<std::string>();
      spec.target = e.value("target", spec.target);
      spec.scenario = e.value("scenario", std::string{"external"});
      grid.external.push_back(spec);
    }
  }
  if (grid.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (grid.scenarios.empty()) throw std::invalid_argument("grid needs at least one scenario");
  if (grid.algorithms.empty()) throw std::invalid_argument("grid needs at least one algorithm");
  return grid;
}

nlohmann::json grid_to_json(const BenchmarkGrid& grid) {
  nlohmann::json j{{"replicates", grid.replicates},
                   {"test_fraction", grid.testFraction},
                   {"seed", grid.seed},
                   {"jobs", grid.jobs},
                   {"draws_dir", grid.drawsDir ? nlohmann::json(grid.drawsDir->string()) : nlohmann::json(nullptr)}};
  j["scenarios"] = nlohmann::json::array();
  for (const auto& s : grid.scenarios) {
    j["scenarios"].push_back({{"n", s.n}, {"p", s.p}, {"noise_sd", s.noiseSd}, {"seed", s.seed}});
  }
  j["algorithms"] = nlohmann::json::array();
  for (const auto& a : grid.algorithms) {
    nlohmann::json cfg = a.hp;
    cfg["name"] = a.name;
    j["algorithms"].push_back(cfg);
  }
  j["external"] = nlohmann::json::array();
  for (const auto& e : grid.external) {
    j["external"].push_back({{"predictions", e.predictions.string()},
                             {"test", e.testData.string()},
                             {"target", e.target},
                             {"scenario", e.scenario}});
  }
  return j;
}

namespace {

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkGrid& grid) {
  // One dataset per scenario, shared by its replicates.
  std::vector<Dataset> datasets;
  for (std::size_t s = 0; s < grid.scenarios.size(); ++s) {
    FriedmanSpec spec = grid.scenarios[s];
    spec.seed = mix(mix(grid.seed, s), spec.seed);
    datasets.push_back(friedman_generate(spec));
  }
  if (grid.drawsDir) std::filesystem::create_directories(*grid.drawsDir);

  const std::size_t nAlg = grid.algorithms.size();
  const std::size_t reps = static_cast<std::size_t>(grid.replicates);
  const std::size_t total = grid.scenarios.size() * reps * nAlg;
  BenchmarkResult result;
  result.cells.resize(total);

  auto run_cell = [&](std::size_t idx) {
    CellResult& cell = result.cells[idx];
    cell.algorithm = idx % nAlg;
    cell.replicate = static_cast<int>((idx / nAlg) % reps);
    cell.scenario = idx / (nAlg * reps);
    try {
      const std::uint64_t splitSeed = mix(mix(grid.seed, 0x73706c6974ULL), cell.scenario * 1000003ULL + static_cast<std::uint64_t>(cell.replicate));
      auto [train, test] = train_test_split(datasets[cell.scenario], grid.testFraction, splitSeed);
      Hyperparams hp = grid.algorithms[cell.algorithm].hp;
      hp.seed = mix(mix(mix(grid.seed, cell.scenario), static_cast<std::uint64_t>(cell.replicate)), cell.algorithm + 1);
      FitResult fitted = fit(train, hp, &test.features);
      const Eigen::VectorXd pred = fitted.draws.test_mean();
      cell.rmse = rmse(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                       std::span<const double>(test.response.data(), static_cast<std::size_t>(test.response.size())));
      cell.params = parameter_accounting(fitted.draws.records);
      if (grid.drawsDir) {
        const std::string stem = file_safe(scenario_label(grid.scenarios[cell.scenario])) + "__" +
                                 file_safe(grid.algorithms[cell.algorithm].name) + "__rep" +
                                 std::to_string(cell.replicate + 1);
        write_draws_jsonl(*grid.drawsDir / (stem + ".jsonl"), fitted.draws.records);
      }
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  };

  const int jobs = std::max(1, grid.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < total; ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < total; i = next++) run_cell(i);
      });
    }
    for (auto& w : workers) w.join();
  }

  for (std::size_t s = 0; s < grid.scenarios.size(); ++s) {
    for (std::size_t a = 0; a < nAlg; ++a) {
      SummaryRow row;
      row.scenario = scenario_label(grid.scenarios[s]);
      row.n = grid.scenarios[s].n;
      row.p = grid.scenarios[s].p;
      row.algorithm = grid.algorithms[a].name;
      std::vector<double> rmses, totals;
      double perTree = 0.0, terminals = 0.0;
      for (const auto& cell : result.cells) {
        if (cell.scenario != s || cell.algorithm != a) continue;
        if (!cell.ok) {
          ++row.failures;
          continue;
        }
        rmses.push_back(cell.rmse);
        totals.push_back(cell.params.total);
        perTree += cell.params.meanPerTree;
        terminals += cell.params.meanTerminalsPerTree;
      }
      row.runs = static_cast<int>(rmses.size());
      if (!rmses.empty()) {
        row.median = quantile(rmses, 0.5);
        row.q1 = quantile(rmses, 0.25);
        row.q3 = quantile(rmses, 0.75);
        const double k = static_cast<double>(totals.size());
        double mean = 0.0;
        for (double t : totals) mean += t;
        mean /= k;
        double ss = 0.0;
        for (double t : totals) ss += (t - mean) * (t - mean);
        row.paramMeanTotal = mean;
        row.paramSdTotal = totals.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
        row.paramMeanPerTree = perTree / k;
        row.terminalMeanPerTree = terminals / k;
        row.hasParams = true;
      }
      result.rows.push_back(row);
    }
  }

  for (const auto& ext : grid.external) {
    SummaryRow row;
    row.scenario = ext.scenario;
    try {
      const Dataset test = load_csv(ext.testData, ext.target, Task::Regression);
      const ExternalEntry entry = ingest_external_predictions(ext.predictions, test);
      row.algorithm = entry.label;
      row.n = test.n();
      row.p = static_cast<int>(test.p());
      row.runs = 1;
      row.median = row.q1 = row.q3 = entry.rmse;
    } catch (const std::exception&) {
      row.algorithm = ext.predictions.stem().string();
      row.failures = 1;
    }
    result.rows.push_back(row);
  }
  return result;
}

ExternalEntry ingest_external_predictions(const std::filesystem::path& path, const Dataset& testSet) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions file: " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    std::string cell = line.substr(0, line.find(','));
    cell.erase(std::remove_if(cell.begin(), cell.end(), [](unsigned char c) { return std::isspace(c); }), cell.end());
    if (cell.empty()) continue;
    try {
      std::size_t used = 0;
      double v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      values.push_back(v);
    } catch (const std::exception&) {
      if (lineNo == 1) continue;  // header
      throw std::runtime_error("non-numeric prediction '" + cell + "' at line " + std::to_string(lineNo) + " of " +
                               path.string());
    }
  }
  if (static_cast<Eigen::Index>(values.size()) != testSet.n()) {
    throw std::runtime_error("prediction count " + std::to_string(values.size()) + " does not match test rows " +
                             std::to_string(testSet.n()) + " in " + path.string());
  }
  ExternalEntry entry;
  entry.label = path.stem().string();
  entry.rmse = rmse(values, std::span<const double>(testSet.response.data(), static_cast<std::size_t>(testSet.n())));
  return entry;
}

std::string format_rmse_cell(double median, double q1, double q3) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << median << " (" << q1 << ';' << q3 << ')';
  return out.str();
}

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

void write_rmse_table(const std::filesystem::path& path, const BenchmarkResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "scenario,n,p,algorithm,runs,failures,median,q1,q3,formatted\n" << std::setprecision(10);
  for (const auto& row : result.rows) {
    out << csv_quote(row.scenario) << ',' << row.n << ',' << row.p << ',' << csv_quote(row.algorithm) << ',' << row.runs
        << ',' << row.failures << ',';
    if (row.runs > 0) {
      out << row.median << ',' << row.q1 << ',' << row.q3 << ',' << csv_quote(format_rmse_cell(row.median, row.q1, row.q3));
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

void write_param_counts(const std::filesystem::path& path, const BenchmarkResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "scenario,n,p,algorithm,runs,mean_total_parameters,sd_total_parameters,mean_parameters_per_tree,"
         "mean_terminal_nodes_per_tree\n"
      << std::setprecision(10);
  for (const auto& row : result.rows) {
    if (!row.hasParams) continue;
    out << csv_quote(row.scenario) << ',' << row.n << ',' << row.p << ',' << csv_quote(row.algorithm) << ',' << row.runs
        << ',' << row.paramMeanTotal << ',' << row.paramSdTotal << ',' << row.paramMeanPerTree << ','
        << row.terminalMeanPerTree << '\n';
  }
}

std::string render_text_table(const BenchmarkResult& result) {
  std::size_t algWidth = std::string("Algorithm").size();
  for (const auto& row : result.rows) algWidth = std::max(algWidth, row.algorithm.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(algWidth) + 2) << "Algorithm" << std::setw(6) << "p"
      << std::setw(22) << "RMSE" << "Mean params (sd)\n";
  std::string current;
  for (const auto& row : result.rows) {
    if (row.scenario != current) {
      current = row.scenario;
      out << "--- " << current << " ---\n";
    }
    out << std::left << std::setw(static_cast<int>(algWidth) + 2) << row.algorithm << std::setw(6) << row.p;
    if (row.runs > 0) {
      out << std::setw(22) << format_rmse_cell(row.median, row.q1, row.q3);
    } else {
      out << std::setw(22) << "failed";
    }
    if (row.hasParams) {
      std::ostringstream pc;
      pc << std::fixed << std::setprecision(0) << row.paramMeanTotal << " (" << row.paramSdTotal << ")";
      out << pc.str();
    }
    if (row.failures > 0) out << "  [" << row.failures << " failed]";
    out << '\n';
  }
  return out.str();
}

}  // namespace motr
