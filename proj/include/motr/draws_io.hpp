#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "motr/sampler.hpp"

namespace motr {

inline constexpr const char* kVersion = "motr 0.1.0";

nlohmann::json record_to_json(const DrawRecord& rec);
DrawRecord record_from_json(const nlohmann::json& j);

// One retained iteration per line.
void write_draws_jsonl(const std::filesystem::path& path, const std::vector<DrawRecord>& records);
std::vector<DrawRecord> read_draws_jsonl(const std::filesystem::path& path);

// Two columns: iteration (1-based, burn-in included), sigma2.
void write_sigma2_trace(const std::filesystem::path& path, const std::vector<double>& trace);

struct RunMetadata {
  std::string version = kVersion;
  Task task = Task::Regression;
  std::string target;
  std::string dataPath;
  std::vector<std::string> featureNames;
  ScalingInfo scaling;
  Hyperparams hyperparams;
  double lambda = 0.0;
  int burnIn = 0;
  int retained = 0;
  std::vector<double> trainMeanPrediction;
};

void to_json(nlohmann::json& j, const RunMetadata& m);
void from_json(const nlohmann::json& j, RunMetadata& m);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace motr
