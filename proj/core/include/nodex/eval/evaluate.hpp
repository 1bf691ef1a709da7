#pragma once

#include "nodex/data/types.hpp"
#include "nodex/eval/metrics.hpp"
#include "nodex/model/features.hpp"
#include "nodex/probe/probe.hpp"

namespace nodex::eval {

struct EvaluateOptions {
  std::string mode = "knn";  // "knn" or "trained"
  int k = 50;
  bool weighted_knn = true;
  model::FeatureSource knn_source = model::FeatureSource::final_token;
  Scalar annotation_fraction = 1.0;  // metadata carried into the report
  std::string config_fingerprint;
};

/// Per-image metrics over the test split: within-+-1 accuracy per attribute
/// (internalStructure computed but flagged unreported), exact accuracy for
/// malignancy over images with a defined label, the attribute-count
/// distribution, and a per-nodule aggregate as a secondary statistic.
/// Throws on split leakage or when the mode's inputs are missing.
MetricsReport evaluate(model::Encoder& encoder, const nn::ParamStore& encoder_store,
                       const probe::ProbeParameters* probes, const data::Dataset& dataset,
                       const data::DatasetSplit& split, const EvaluateOptions& options);

}  // namespace nodex::eval
