#include "nodex/data/types.hpp"

#include <algorithm>

namespace nodex::data {

std::string to_string(Malignancy m) {
  switch (m) {
    case Malignancy::benign: return "benign";
    case Malignancy::malignant: return "malignant";
    case Malignancy::excluded: return "excluded";
  }
  return "excluded";
}

Malignancy malignancy_from_string(const std::string& s) {
  if (s == "benign") return Malignancy::benign;
  if (s == "malignant") return Malignancy::malignant;
  if (s == "excluded") return Malignancy::excluded;
  throw InvalidInput("unknown malignancy label: " + s);
}

void RawNoduleAnnotation::validate() const {
  NODEX_CHECK(attribute_scores.size() == kNumAttributes,
              "annotation " + nodule_id + "/" + reader_id + ": expected 8 attribute scores");
  for (int i = 0; i < kNumAttributes; ++i) {
    auto it = attribute_scores.find(kAttributeNames[i]);
    NODEX_CHECK(it != attribute_scores.end(), "annotation " + nodule_id + "/" + reader_id +
                                                  ": missing attribute " + kAttributeNames[i]);
    NODEX_CHECK(it->second >= 1 && it->second <= kAttributeClassCounts[i],
                "annotation " + nodule_id + "/" + reader_id + ": attribute " +
                    kAttributeNames[i] + " out of range");
  }
  NODEX_CHECK(malignancy_score >= 1 && malignancy_score <= 5,
              "annotation " + nodule_id + "/" + reader_id + ": malignancy score out of range");
}

const NoduleLabels& Dataset::labels_for(const std::string& nodule_id) const {
  auto it = labels.find(nodule_id);
  NODEX_REQUIRE(it != labels.end(), "dataset: no labels for nodule " + nodule_id);
  return it->second;
}

std::vector<std::string> Dataset::nodule_ids() const {
  std::vector<std::string> ids;
  ids.reserve(labels.size());
  for (const auto& [id, _] : labels) ids.push_back(id);
  return ids;  // map iteration keeps these sorted
}

std::vector<std::size_t> Dataset::sample_indices(const std::set<std::string>& ids) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (ids.count(samples[i].nodule_id)) out.push_back(i);
  return out;
}

}  // namespace nodex::data
