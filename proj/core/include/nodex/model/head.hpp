#pragma once

#include <nlohmann/json.hpp>

#include "nodex/nn/layers.hpp"

namespace nodex::model {

struct ProjectionHeadConfig {
  int hidden_dim = 2048;
  int bottleneck_dim = 256;
  int output_dim = 65536;  // K
  bool weight_norm_last = true;
  bool l2_normalize_bottleneck = true;

  void validate() const;
  nlohmann::json to_json() const;
  static ProjectionHeadConfig from_json(const nlohmann::json& j);
};

/// Three GELU-separated linear layers down to the bottleneck, row-wise l2
/// normalisation, then a weight-normalised output layer of K logits.
class ProjectionHead {
public:
  ProjectionHead(const ProjectionHeadConfig& cfg, Eigen::Index in_dim, nn::ParamStore& store,
                 Rng& rng);

  Matrix forward(const Matrix& features);
  Matrix backward(const Matrix& dlogits);

  /// Bottleneck activations of the latest forward, after l2 normalisation.
  const Matrix& bottleneck() const { return bottleneck_; }
  nn::WeightNormLinear& last_layer() { return last_; }

private:
  ProjectionHeadConfig cfg_;
  nn::Linear fc1_, fc2_, fc3_;
  nn::Gelu act1_, act2_;
  nn::L2NormalizeRows l2_;
  nn::WeightNormLinear last_;
  Matrix bottleneck_;
};

}  // namespace nodex::model
