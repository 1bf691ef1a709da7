#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "nodex/common.hpp"

namespace nodex::eval {

/// Percentage of predictions within +-1 of the true ordinal.
Scalar within_one_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Percentage of exact matches (used for the binary malignancy task).
Scalar exact_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Poisson-binomial distribution of the number of correct attributes under
/// independence, computed by convolution. accuracies are fractions in [0,1].
std::array<Scalar, kNumAttributes + 1> attribute_count_distribution(
    const std::array<Scalar, kNumAttributes>& accuracies);

/// Mean inter-class pairwise distance divided by mean intra-class pairwise
/// distance (rows of `features`, integer class labels). Requires at least
/// two classes and one intra-class pair.
Scalar class_distance_ratio(const Matrix& features, const std::vector<int>& labels);

struct MetricsReport {
  int format_version = 1;
  std::string mode;  // "knn" or "trained"
  int k = 0;         // knn only
  Scalar annotation_fraction = 1.0;
  std::string config_fingerprint;

  std::array<Scalar, kNumAttributes> attribute_accuracy{};  // percentages
  std::array<bool, kNumAttributes> attribute_reported{};    // internalStructure flagged off
  Scalar malignancy_accuracy = 0;
  std::array<Scalar, kNumAttributes + 1> count_distribution{};
  std::size_t n_test_images = 0;
  std::size_t n_test_nodules = 0;

  // Secondary statistic: per-nodule aggregation of the per-image readouts.
  std::array<Scalar, kNumAttributes> per_nodule_attribute_accuracy{};
  Scalar per_nodule_malignancy_accuracy = 0;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static MetricsReport load(const std::filesystem::path& path);
};

}  // namespace nodex::eval
