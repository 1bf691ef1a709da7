#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "nodex/common.hpp"

namespace nodex::data {

enum class Malignancy { benign, malignant, excluded };

std::string to_string(Malignancy m);
Malignancy malignancy_from_string(const std::string& s);

/// One radiologist's annotation of one nodule, joined with scan metadata.
struct RawNoduleAnnotation {
  std::string nodule_id;
  std::string reader_id;
  std::map<std::string, int> attribute_scores;  // exactly the 8 canonical names
  int malignancy_score = 0;                     // ordinal 1..5
  Scalar slice_thickness_mm = -1.0;             // <0 means missing metadata
  Scalar centroid_z = 0, centroid_y = 0, centroid_x = 0;  // voxel coords

  void validate() const;
};

/// Median-aggregated labels for one nodule.
struct NoduleLabels {
  std::array<int, kNumAttributes> attributes{};  // ordinals, 1-based
  Malignancy malignancy = Malignancy::excluded;
  int reader_count = 0;
};

/// One nodule's aggregated record: labels plus a canonical 32x32 patch.
struct AggregatedNodule {
  std::string nodule_id;
  Matrix patch;  // kPatchSize x kPatchSize, intensities in [0,1]
  NoduleLabels labels;
};

/// One training/testing image: a patch extracted for a single annotation.
/// Labels always come from the nodule-level aggregation.
struct Sample {
  std::string nodule_id;
  std::string reader_id;
  Matrix patch;
};

struct Dataset {
  std::vector<Sample> samples;
  std::map<std::string, NoduleLabels> labels;  // nodule_id -> aggregated labels

  std::size_t n_nodules() const { return labels.size(); }
  const NoduleLabels& labels_for(const std::string& nodule_id) const;
  std::vector<std::string> nodule_ids() const;
  /// Indices of samples whose nodule is in `ids`, in dataset order.
  std::vector<std::size_t> sample_indices(const std::set<std::string>& ids) const;
};

struct DatasetSplit {
  std::set<std::string> train_nodule_ids;
  std::set<std::string> test_nodule_ids;
  std::uint64_t seed = 0;
  bool stratified = false;
};

struct AnnotationMask {
  Scalar fraction = 1.0;
  std::set<std::string> annotated_ids;  // nodule ids, subset of the train set
  std::uint64_t seed = 0;
};

}  // namespace nodex::data
