#pragma once

#include <nlohmann/json.hpp>

#include "nodex/common.hpp"
#include "nodex/rng.hpp"

namespace nodex::augment {

/// One applied transform with the parameters that were sampled for it.
/// A view's ordered list of steps is sufficient to replay it bit-exactly.
struct TransformStep {
  std::string name;
  std::map<std::string, Scalar> params;
};
using TransformLog = std::vector<TransformStep>;

nlohmann::json log_to_json(const TransformLog& log);
TransformLog log_from_json(const nlohmann::json& j);

struct ViewConfig {
  int n_global = 2;
  int n_local = 8;
  int global_size = 32;
  int local_size = 16;
  Scalar global_scale_lo = 0.4, global_scale_hi = 1.0;
  Scalar local_scale_lo = 0.05, local_scale_hi = 0.4;
  // Recipe switches; each transform can be disabled independently.
  bool crop = true;
  bool hflip = true;
  bool jitter = true;
  bool blur = true;
  bool solarize = true;
  Scalar jitter_strength = 0.4;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ViewConfig from_json(const nlohmann::json& j);
};

struct ViewBatch {
  // One matrix per view slot, rows are samples, columns flattened pixels.
  std::vector<Matrix> global_views;  // n_global entries of [N, global_size^2]
  std::vector<Matrix> local_views;   // n_local entries of [N, local_size^2]
  // provenance[slot][sample]; global slots first, then local slots.
  std::vector<std::vector<TransformLog>> provenance;

  int n_views() const {
    return static_cast<int>(global_views.size() + local_views.size());
  }
};

/// Multi-crop view generation. Per (seed, slot, sample) substreams make the
/// result independent of iteration order; identical seeds give bit-identical
/// batches.
ViewBatch make_views(const std::vector<Matrix>& patches, const ViewConfig& config);

/// Replays a transform log against a source patch.
Matrix apply_transform_log(const Matrix& patch, const TransformLog& log);

struct ProbeAugmentConfig {
  bool enabled = true;
  bool hflip = true;
  Scalar max_rotation_deg = 10.0;
  int max_translate_px = 2;
};

/// Light label-preserving augmentation for stage-2 training inputs.
std::vector<Matrix> augment_probe(const std::vector<Matrix>& patches,
                                  const ProbeAugmentConfig& config, std::uint64_t seed);

// Individual transforms (exposed for tests).
Matrix resize_bilinear(const Matrix& src, int out_h, int out_w);
Matrix gaussian_blur(const Matrix& src, Scalar sigma);
Matrix hflip(const Matrix& src);
Matrix rotate_bilinear(const Matrix& src, Scalar degrees);

}  // namespace nodex::augment
