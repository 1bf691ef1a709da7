#include "nodex/eval/metrics.hpp"

#include <cmath>
#include <fstream>

namespace nodex::eval {

using nlohmann::json;

Scalar within_one_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  NODEX_CHECK(predicted.size() == truth.size() && !predicted.empty(),
              "within_one_accuracy: length mismatch or empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (std::abs(predicted[i] - truth[i]) <= 1) ++hits;
  return 100.0 * static_cast<Scalar>(hits) / static_cast<Scalar>(predicted.size());
}

Scalar exact_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  NODEX_CHECK(predicted.size() == truth.size() && !predicted.empty(),
              "exact_accuracy: length mismatch or empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == truth[i]) ++hits;
  return 100.0 * static_cast<Scalar>(hits) / static_cast<Scalar>(predicted.size());
}

std::array<Scalar, kNumAttributes + 1> attribute_count_distribution(
    const std::array<Scalar, kNumAttributes>& accuracies) {
  for (Scalar a : accuracies)
    NODEX_CHECK(a >= 0.0 && a <= 1.0, "attribute_count_distribution: accuracy outside [0,1]");
  std::array<Scalar, kNumAttributes + 1> dist{};
  dist[0] = 1.0;
  int upto = 0;
  for (Scalar a : accuracies) {
    ++upto;
    for (int c = upto; c >= 1; --c) dist[static_cast<std::size_t>(c)] =
        dist[static_cast<std::size_t>(c)] * (1.0 - a) + dist[static_cast<std::size_t>(c - 1)] * a;
    dist[0] *= (1.0 - a);
  }
  return dist;
}

Scalar class_distance_ratio(const Matrix& features, const std::vector<int>& labels) {
  NODEX_CHECK(static_cast<std::size_t>(features.rows()) == labels.size(),
              "class_distance_ratio: label count mismatch");
  Scalar inter = 0, intra = 0;
  std::size_t n_inter = 0, n_intra = 0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < features.rows(); ++j) {
      Scalar d = (features.row(i) - features.row(j)).norm();
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  NODEX_CHECK(n_inter > 0 && n_intra > 0, "class_distance_ratio: need both pair kinds");
  return (inter / static_cast<Scalar>(n_inter)) / (intra / static_cast<Scalar>(n_intra));
}

json MetricsReport::to_json() const {
  json j;
  j["format_version"] = format_version;
  j["mode"] = mode;
  if (mode == "knn") j["k"] = k;
  j["annotation_fraction"] = annotation_fraction;
  j["config_fingerprint"] = config_fingerprint;
  json attrs;
  for (int i = 0; i < kNumAttributes; ++i)
    attrs[kAttributeNames[i]] = {
        {"accuracy", attribute_accuracy[static_cast<std::size_t>(i)]},
        {"reported", attribute_reported[static_cast<std::size_t>(i)]},
        {"per_nodule_accuracy", per_nodule_attribute_accuracy[static_cast<std::size_t>(i)]}};
  j["attributes"] = attrs;
  j["malignancy_accuracy"] = malignancy_accuracy;
  j["per_nodule_malignancy_accuracy"] = per_nodule_malignancy_accuracy;
  j["count_distribution"] = count_distribution;
  j["n_test_images"] = n_test_images;
  j["n_test_nodules"] = n_test_nodules;
  return j;
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  r.format_version = j.at("format_version").get<int>();
  NODEX_REQUIRE(r.format_version == 1, "metrics report: unsupported format_version");
  r.mode = j.at("mode").get<std::string>();
  r.k = j.value("k", 0);
  r.annotation_fraction = j.at("annotation_fraction").get<Scalar>();
  r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  for (int i = 0; i < kNumAttributes; ++i) {
    const json& a = j.at("attributes").at(kAttributeNames[i]);
    r.attribute_accuracy[static_cast<std::size_t>(i)] = a.at("accuracy").get<Scalar>();
    r.attribute_reported[static_cast<std::size_t>(i)] = a.at("reported").get<bool>();
    r.per_nodule_attribute_accuracy[static_cast<std::size_t>(i)] =
        a.at("per_nodule_accuracy").get<Scalar>();
  }
  r.malignancy_accuracy = j.at("malignancy_accuracy").get<Scalar>();
  r.per_nodule_malignancy_accuracy = j.at("per_nodule_malignancy_accuracy").get<Scalar>();
  for (std::size_t c = 0; c <= kNumAttributes; ++c)
    r.count_distribution[c] = j.at("count_distribution").at(c).get<Scalar>();
  r.n_test_images = j.at("n_test_images").get<std::size_t>();
  r.n_test_nodules = j.at("n_test_nodules").get<std::size_t>();
  return r;
}

void MetricsReport::save(const std::filesystem::path& path) const {
  std::ofstream f(path);
  NODEX_REQUIRE(f.good(), "metrics report: cannot open " + path.string());
  f << to_json().dump(2) << "\n";
}

MetricsReport MetricsReport::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  NODEX_REQUIRE(f.good(), "metrics report: cannot open " + path.string());
  json j;
  f >> j;
  return from_json(j);
}

}  // namespace nodex::eval
