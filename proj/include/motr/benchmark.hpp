#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "motr/data.hpp"
#include "motr/sampler.hpp"

namespace motr {

struct FriedmanSpec {
  Eigen::Index n = 500;
  int p = 5;
  double noiseSd = 1.0;
  std::uint64_t seed = 1;
};

// Noise-free Friedman signal; x needs at least five entries.
template <typename Row>
double friedman_signal(const Row& x) {
  constexpr double kPi = 3.14159265358979323846;
  const double a = x[2] - 0.5;
  return 10.0 * std::sin(kPi * x[0] * x[1]) + 20.0 * a * a + 10.0 * x[3] + 5.0 * x[4];
}

// x ~ U(0,1)^p, y = signal(x) + N(0, noiseSd^2). Columns beyond the fifth are noise.
Dataset friedman_generate(const FriedmanSpec& spec);

double rmse(std::span<const double> predicted, std::span<const double> observed);

struct ParameterSummary {
  long iterations = 0;
  int trees = 0;
  double total = 0.0;               // summed over trees and retained iterations
  double meanPerIteration = 0.0;
  double sdPerIteration = 0.0;
  double meanPerTree = 0.0;          // total / (iterations * trees)
  double totalTerminals = 0.0;
  double meanTerminalsPerTree = 0.0;
};

ParameterSummary parameter_accounting(std::span<const DrawRecord> records);

struct EngineConfig {
  std::string name;
  Hyperparams hp;
};

struct ExternalPredictionSpec {
  std::filesystem::path predictions;  // one value per line, optional header
  std::filesystem::path testData;
  std::string target = "y";
  std::string scenario;  // label used in the RMSE table
};

struct BenchmarkGrid {
  std::vector<FriedmanSpec> scenarios;
  std::vector<EngineConfig> algorithms;
  int replicates = 10;
  double testFraction = 0.2;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::optional<std::filesystem::path> drawsDir;  // per-run draw files when set
  std::vector<ExternalPredictionSpec> external;
};

BenchmarkGrid grid_from_json(const nlohmann::json& j);
nlohmann::json grid_to_json(const BenchmarkGrid& grid);

struct CellResult {
  std::size_t scenario = 0;
  std::size_t algorithm = 0;
  int replicate = 0;
  bool ok = false;
  double rmse = 0.0;
  ParameterSummary params;
  std::string error;
};

struct SummaryRow {
  std::string scenario;
  Eigen::Index n = 0;
  int p = 0;
  std::string algorithm;
  int runs = 0;
  int failures = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double paramMeanTotal = 0.0;  // mean over replicates of the summed count
  double paramSdTotal = 0.0;
  double paramMeanPerTree = 0.0;
  double terminalMeanPerTree = 0.0;
  bool hasParams = false;
};

struct BenchmarkResult {
  std::vector<CellResult> cells;
  std::vector<SummaryRow> rows;
};

std::string scenario_label(const FriedmanSpec& spec);

// R type-7 quantile.
double quantile(std::vector<double> values, double prob);

BenchmarkResult run_benchmark(const BenchmarkGrid& grid);

struct ExternalEntry {
  std::string label;
  double rmse = 0.0;
};
ExternalEntry ingest_external_predictions(const std::filesystem::path& path, const Dataset& testSet);

// "1.12 (1.11;1.19)"
std::string format_rmse_cell(double median, double q1, double q3);
void write_rmse_table(const std::filesystem::path& path, const BenchmarkResult& result);
void write_param_counts(const std::filesystem::path& path, const BenchmarkResult& result);
std::string render_text_table(const BenchmarkResult& result);

}  // namespace motr
