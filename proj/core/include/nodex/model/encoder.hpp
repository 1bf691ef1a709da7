#pragma once

#include <memory>

#include <nlohmann/json.hpp>

#include "nodex/nn/conv.hpp"
#include "nodex/nn/layers.hpp"

namespace nodex::model {

enum class FeatureSource { final_token, concat_last_4 };

std::string to_string(FeatureSource s);
FeatureSource feature_source_from_string(const std::string& s);

struct EncoderConfig {
  std::string kind = "vit";  // "vit" or "cnn"
  // vit
  int depth = 12;
  int n_heads = 6;
  int embed_dim = 384;
  int patch_size = 16;
  int input_size = 32;
  int mlp_ratio = 4;
  // cnn
  int cnn_width = 32;  // stem width; stages run [w, 2w, 4w], feature dim 4w

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);

  /// Feature dimension of the final-token mode (4*cnn_width for cnn).
  int base_dim() const { return kind == "cnn" ? 4 * cnn_width : embed_dim; }
};

/// One differentiable graph over shared parameters. Construct several
/// replicas against the same store to process batches of different spatial
/// sizes inside one step.
class Encoder {
public:
  virtual ~Encoder() = default;

  /// patches: [n, height*width] row-major pixels. Returns features
  /// [n, feature_dim(source)].
  virtual Matrix forward(const Matrix& patches, int height, int width,
                         FeatureSource source = FeatureSource::final_token) = 0;

  /// Backward for the latest forward. Only the final_token path supports
  /// gradients; concat_last_4 is an inference-only readout.
  virtual void backward(const Matrix& dfeatures) = 0;

  virtual Eigen::Index feature_dim(FeatureSource source) const = 0;
};

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, nn::ParamStore& store,
                                      Rng& rng);

/// Backbone parameter count for a config (constructs into a throwaway store).
std::size_t encoder_parameter_count(const EncoderConfig& config);

}  // namespace nodex::model
