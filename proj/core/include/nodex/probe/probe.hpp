#pragma once

#include <filesystem>

#include "nodex/data/types.hpp"
#include "nodex/model/encoder.hpp"

namespace nodex::probe {

/// Linear probe heads over frozen features: one head per attribute plus a
/// malignancy head fed with the feature vector concatenated with all
/// attribute logits (canonical attribute order).
struct ProbeParameters {
  Eigen::Index feature_dim = 0;
  model::FeatureSource source = model::FeatureSource::concat_last_4;
  nn::ParamStore store{true};

  static ProbeParameters create(Eigen::Index feature_dim, model::FeatureSource source,
                                std::uint64_t seed);

  const Matrix& attr_weight(int i) const;
  const Matrix& attr_bias(int i) const;
  const Matrix& cls_weight() const;
  const Matrix& cls_bias() const;

  Eigen::Index concat_dim() const { return feature_dim + total_attribute_classes(); }

  void save(const std::filesystem::path& path) const;
  static ProbeParameters load(const std::filesystem::path& path);
};

/// One logit matrix [N, C_i] per attribute.
std::vector<Matrix> predict_attributes(const ProbeParameters& probe, const Matrix& features);

/// Malignancy logits [N, 2] from features ++ attribute logits.
Matrix predict_malignancy(const ProbeParameters& probe, const Matrix& features,
                          const std::vector<Matrix>& attribute_logits);

struct Stage2Loss {
  Scalar total = 0;
  std::array<Scalar, kNumAttributes> attribute_terms{};
  Scalar malignancy_term = 0;
};

/// Joint cross-entropy: one term per attribute head (batch mean) plus the
/// malignancy term averaged over rows with a defined label (malignancy_label
/// = -1 marks excluded rows, which contribute attribute terms only). The
/// total is the unweighted sum of the 9 terms. Out-of-range labels raise.
Stage2Loss loss_stage2(const std::vector<Matrix>& attribute_logits, const Matrix& mal_logits,
                       const std::vector<std::array<int, kNumAttributes>>& attribute_labels,
                       const std::vector<int>& malignancy_labels);

/// Hard argmax readouts (attribute ordinals are 1-based).
std::vector<std::array<int, kNumAttributes>> attribute_predictions(
    const std::vector<Matrix>& attribute_logits);
std::vector<int> malignancy_predictions(const Matrix& mal_logits);

/// Forward + loss + gradient accumulation into probe.store for one batch.
/// With joint_grad the malignancy term backpropagates through the attribute
/// logits into their heads; dfeatures (optional) receives dL/dfeatures for
/// end-to-end training.
Stage2Loss probe_loss_backward(ProbeParameters& probe, const Matrix& features,
                               const std::vector<std::array<int, kNumAttributes>>& attr_labels,
                               const std::vector<int>& mal_labels, bool joint_grad,
                               Matrix* dfeatures = nullptr);

}  // namespace nodex::probe
