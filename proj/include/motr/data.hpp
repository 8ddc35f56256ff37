#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace motr {

enum class Task { Regression, Classification };

std::string to_string(Task task);
Task parse_task(const std::string& text);

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Feature matrix is column-major (Eigen default): column j holds feature j.
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd response;
  std::vector<std::string> featureNames;
  Task task = Task::Regression;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index p() const { return features.cols(); }

  // Throws DataError if any invariant is broken.
  void validate() const;

  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

struct ScalingInfo {
  std::vector<double> featureCenters;
  std::vector<double> featureScales;
  double responseCenter = 0.0;
  double responseScale = 1.0;
  bool responseScaled = false;

  // Map raw features into the standardized space used by trees.
  Eigen::MatrixXd transform_features(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd inverse_features(const Eigen::MatrixXd& scaled) const;
  double transform_response(double y) const { return responseScaled ? (y - responseCenter) / responseScale : y; }
  double inverse_response(double y) const { return responseScaled ? responseCenter + responseScale * y : y; }
};

void to_json(nlohmann::json& j, const ScalingInfo& s);
void from_json(const nlohmann::json& j, ScalingInfo& s);

// Sorted distinct training values per feature (standardized scale).
struct SplitDictionary {
  std::vector<std::vector<double>> values;

  std::size_t feature_count() const { return values.size(); }
  // A feature with a single distinct value cannot separate rows.
  bool splittable(std::size_t feature) const { return values[feature].size() > 1; }
};

// Parse a header-first numeric CSV. The target column becomes the response.
Dataset load_csv(const std::filesystem::path& path, const std::string& targetColumn, Task task);

// Header names of a CSV file, in file order.
std::vector<std::string> read_csv_header(const std::filesystem::path& path);

// Raw numeric table (header + rows) with the same validation as load_csv.
struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
NumericTable read_numeric_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const Dataset& data, const std::string& targetName = "y");

// Standardize features to mean 0 / sd 1 (sample sd); optionally min-max the
// regression response onto [-0.5, 0.5].
std::pair<Dataset, ScalingInfo> standardize(const Dataset& dataset, bool scaleResponse);

// Apply stored scaling to another dataset (e.g. test rows).
Dataset apply_scaling(const Dataset& dataset, const ScalingInfo& scaling);
Dataset unstandardize(const Dataset& scaled, const ScalingInfo& scaling);

SplitDictionary split_dictionary(const Dataset& dataset);

std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double testFraction, std::uint64_t seed);

}  // namespace motr
