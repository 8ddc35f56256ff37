#include "motr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "motr/random.hpp"

namespace motr {

std::string to_string(Task task) { return task == Task::Regression ? "regression" : "classification"; }

Task parse_task(const std::string& text) {
  if (text == "regression") return Task::Regression;
  if (text == "classification") return Task::Classification;
  throw DataError("unknown task '" + text + "' (expected regression or classification)");
}

void Dataset::validate() const {
  if (n() < 2) throw DataError("dataset needs at least 2 rows, got " + std::to_string(n()));
  if (p() < 1) throw DataError("dataset needs at least 1 feature column");
  if (response.size() != n()) throw DataError("response length does not match row count");
  if (static_cast<Eigen::Index>(featureNames.size()) != p()) throw DataError("feature name count does not match column count");
  if (!features.allFinite() || !response.allFinite()) throw DataError("dataset contains non-finite values");
  if (task == Task::Classification) {
    for (Eigen::Index i = 0; i < n(); ++i) {
      if (response[i] != 0.0 && response[i] != 1.0) {
        throw DataError("response not in {0,1} at row " + std::to_string(i + 1));
      }
    }
  }
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.task = task;
  out.featureNames = featureNames;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), p());
  out.response.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.features.row(static_cast<Eigen::Index>(k)) = features.row(rows[k]);
    out.response[static_cast<Eigen::Index>(k)] = response[rows[k]];
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

std::string location(std::size_t row, const std::string& column) {
  return "row " + std::to_string(row) + ", column '" + column + "'";
}

}  // namespace

NumericTable read_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  NumericTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("file is empty: " + path.string());
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
  table.header = split_line(line);
  for (const auto& name : table.header) {
    if (name.empty()) throw DataError("empty column name in header of " + path.string());
  }
  std::size_t dataRow = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++dataRow;
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw DataError("row " + std::to_string(dataRow) + " has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(table.header.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan") {
        throw DataError("missing value at " + location(dataRow, table.header[c]));
      }
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, values[c]);
      if (ec != std::errc() || ptr != last || !std::isfinite(values[c])) {
        throw DataError("non-numeric value '" + cell + "' at " + location(dataRow, table.header[c]));
      }
    }
    table.rows.push_back(std::move(values));
  }
  return table;
}

std::vector<std::string> read_csv_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("file is empty: " + path.string());
  return split_line(line);
}

Dataset load_csv(const std::filesystem::path& path, const std::string& targetColumn, Task task) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  NumericTable table = read_numeric_csv(path);
  auto it = std::find(table.header.begin(), table.header.end(), targetColumn);
  if (it == table.header.end()) throw DataError("target column '" + targetColumn + "' not found in " + path.string());
  const auto target = static_cast<std::size_t>(it - table.header.begin());

  Dataset data;
  data.task = task;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c != target) data.featureNames.push_back(table.header[c]);
  }
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  data.features.resize(n, static_cast<Eigen::Index>(data.featureNames.size()));
  data.response.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == target) {
        data.response[i] = row[c];
      } else {
        data.features(i, j++) = row[c];
      }
    }
  }
  data.validate();
  return data;
}

void write_csv(const std::filesystem::path& path, const Dataset& data, const std::string& targetName) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  for (const auto& name : data.featureNames) out << name << ',';
  out << targetName << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.p(); ++j) out << data.features(i, j) << ',';
    out << data.response[i] << '\n';
  }
  if (!out) throw DataError("failed writing file: " + path.string());
}

Eigen::MatrixXd ScalingInfo::transform_features(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != static_cast<Eigen::Index>(featureCenters.size())) {
    throw DataError("feature count mismatch: expected " + std::to_string(featureCenters.size()) + ", got " +
                    std::to_string(raw.cols()));
  }
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    auto jj = static_cast<std::size_t>(j);
    out.col(j) = (raw.col(j).array() - featureCenters[jj]) / featureScales[jj];
  }
  return out;
}

Eigen::MatrixXd ScalingInfo::inverse_features(const Eigen::MatrixXd& scaled) const {
  Eigen::MatrixXd out(scaled.rows(), scaled.cols());
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    auto jj = static_cast<std::size_t>(j);
    out.col(j) = scaled.col(j).array() * featureScales[jj] + featureCenters[jj];
  }
  return out;
}

void to_json(nlohmann::json& j, const ScalingInfo& s) {
  j = nlohmann::json{{"feature_centers", s.featureCenters},
                     {"feature_scales", s.featureScales},
                     {"response_center", s.responseCenter},
                     {"response_scale", s.responseScale},
                     {"response_scaled", s.responseScaled}};
}

void from_json(const nlohmann::json& j, ScalingInfo& s) {
  j.at("feature_centers").get_to(s.featureCenters);
  j.at("feature_scales").get_to(s.featureScales);
  j.at("response_center").get_to(s.responseCenter);
  j.at("response_scale").get_to(s.responseScale);
  j.at("response_scaled").get_to(s.responseScaled);
}

std::pair<Dataset, ScalingInfo> standardize(const Dataset& dataset, bool scaleResponse) {
  dataset.validate();
  ScalingInfo info;
  const auto n = dataset.n();
  for (Eigen::Index j = 0; j < dataset.p(); ++j) {
    const auto col = dataset.features.col(j);
    double mean = col.mean();
    double ss = (col.array() - mean).square().sum();
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    bool constant = (col.maxCoeff() == col.minCoeff());
    if (constant) {
      // Leave the column untouched: center 0 keeps the raw constant in place.
      info.featureCenters.push_back(0.0);
      info.featureScales.push_back(1.0);
    } else {
      info.featureCenters.push_back(mean);
      info.featureScales.push_back(sd);
    }
  }
  if (scaleResponse && dataset.task == Task::Regression) {
    double lo = dataset.response.minCoeff();
    double hi = dataset.response.maxCoeff();
    info.responseScaled = true;
    info.responseCenter = 0.5 * (lo + hi);
    info.responseScale = hi > lo ? hi - lo : 1.0;
  }
  return {apply_scaling(dataset, info), info};
}

Dataset apply_scaling(const Dataset& dataset, const ScalingInfo& scaling) {
  Dataset out = dataset;
  out.features = scaling.transform_features(dataset.features);
  if (scaling.responseScaled) {
    for (Eigen::Index i = 0; i < out.n(); ++i) out.response[i] = scaling.transform_response(dataset.response[i]);
  }
  return out;
}

Dataset unstandardize(const Dataset& scaled, const ScalingInfo& scaling) {
  Dataset out = scaled;
  out.features = scaling.inverse_features(scaled.features);
  if (scaling.responseScaled) {
    for (Eigen::Index i = 0; i < out.n(); ++i) out.response[i] = scaling.inverse_response(scaled.response[i]);
  }
  return out;
}

SplitDictionary split_dictionary(const Dataset& dataset) {
  SplitDictionary dict;
  dict.values.resize(static_cast<std::size_t>(dataset.p()));
  for (Eigen::Index j = 0; j < dataset.p(); ++j) {
    auto& vals = dict.values[static_cast<std::size_t>(j)];
    vals.assign(dataset.features.col(j).data(), dataset.features.col(j).data() + dataset.n());
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  }
  return dict;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double testFraction, std::uint64_t seed) {
  if (!(testFraction > 0.0 && testFraction < 1.0)) {
    throw DataError("testFraction must lie in (0,1), got " + std::to_string(testFraction));
  }
  const auto n = dataset.n();
  const auto testSize = static_cast<Eigen::Index>(std::llround(static_cast<double>(n) * testFraction));
  if (testSize < 1 || testSize >= n) throw DataError("split leaves an empty training or test set");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed, 0x73706c6974ULL);
  // Fisher-Yates with our own index draws so the permutation is portable.
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.index(i + 1)]);
  }
  std::vector<Eigen::Index> test(order.begin(), order.begin() + testSize);
  std::vector<Eigen::Index> train(order.begin() + testSize, order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {dataset.subset(train), dataset.subset(test)};
}

}  // namespace motr
