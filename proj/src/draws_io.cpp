#include "motr/draws_io.hpp"

#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace motr {

namespace {
const std::array<const char*, kMoveKinds> kMoveNames{"grow", "prune", "change", "swap"};
}

nlohmann::json record_to_json(const DrawRecord& rec) {
  nlohmann::json moves = nlohmann::json::object();
  for (int k = 0; k < kMoveKinds; ++k) {
    moves[kMoveNames[k]] = {rec.moves.proposed[k], rec.moves.accepted[k], rec.moves.rejected[k], rec.moves.invalid[k]};
  }
  nlohmann::json j{{"iteration", rec.iteration},
                   {"sigma2", rec.sigma2},
                   {"tau_beta0", rec.tauBeta0},
                   {"tau_beta", rec.tauBeta},
                   {"terminal_counts", rec.terminalCounts},
                   {"parameter_counts", rec.parameterCounts},
                   {"moves", moves}};
  if (!rec.trees.empty()) {
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : rec.trees) trees.push_back(tree_to_json(t));
    j["trees"] = std::move(trees);
  }
  return j;
}

DrawRecord record_from_json(const nlohmann::json& j) {
  DrawRecord rec;
  j.at("iteration").get_to(rec.iteration);
  j.at("sigma2").get_to(rec.sigma2);
  j.at("tau_beta0").get_to(rec.tauBeta0);
  j.at("tau_beta").get_to(rec.tauBeta);
  j.at("terminal_counts").get_to(rec.terminalCounts);
  j.at("parameter_counts").get_to(rec.parameterCounts);
  const auto& moves = j.at("moves");
  for (int k = 0; k < kMoveKinds; ++k) {
    const auto& v = moves.at(kMoveNames[k]);
    rec.moves.proposed[k] = v.at(0).get<long>();
    rec.moves.accepted[k] = v.at(1).get<long>();
    rec.moves.rejected[k] = v.at(2).get<long>();
    rec.moves.invalid[k] = v.at(3).get<long>();
  }
  if (j.contains("trees")) {
    for (const auto& t : j["trees"]) rec.trees.push_back(tree_from_json(t));
  }
  return rec;
}

void write_draws_jsonl(const std::filesystem::path& path, const std::vector<DrawRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write draws file: " + path.string());
  for (const auto& rec : records) out << record_to_json(rec).dump() << '\n';
  if (!out) throw std::runtime_error("failed writing draws file: " + path.string());
}

std::vector<DrawRecord> read_draws_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read draws file: " + path.string());
  std::vector<DrawRecord> records;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("draws file " + path.string() + " line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return records;
}

void write_sigma2_trace(const std::filesystem::path& path, const std::vector<double>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file: " + path.string());
  out << "iteration,sigma2\n" << std::setprecision(17);
  for (std::size_t k = 0; k < trace.size(); ++k) out << (k + 1) << ',' << trace[k] << '\n';
  if (!out) throw std::runtime_error("failed writing trace file: " + path.string());
}

void to_json(nlohmann::json& j, const RunMetadata& m) {
  j = nlohmann::json{{"version", m.version},
                     {"task", to_string(m.task)},
                     {"target", m.target},
                     {"data", m.dataPath},
                     {"feature_names", m.featureNames},
                     {"scaling", m.scaling},
                     {"hyperparams", m.hyperparams},
                     {"lambda", m.lambda},
                     {"burnin", m.burnIn},
                     {"retained", m.retained},
                     {"train_mean_prediction", m.trainMeanPrediction}};
}

void from_json(const nlohmann::json& j, RunMetadata& m) {
  j.at("version").get_to(m.version);
  m.task = parse_task(j.at("task").get<std::string>());
  j.at("target").get_to(m.target);
  m.dataPath = j.value("data", std::string{});
  j.at("feature_names").get_to(m.featureNames);
  j.at("scaling").get_to(m.scaling);
  j.at("hyperparams").get_to(m.hyperparams);
  j.at("lambda").get_to(m.lambda);
  j.at("burnin").get_to(m.burnIn);
  j.at("retained").get_to(m.retained);
  m.trainMeanPrediction = j.value("train_mean_prediction", std::vector<double>{});
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing file: " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace motr
