#pragma once

#include "nodex/data/types.hpp"
#include "nodex/model/encoder.hpp"

namespace nodex::model {

/// Rows of flattened pixels for a list of samples, ready for Encoder::forward.
Matrix patches_to_rows(const std::vector<data::Sample>& samples,
                       const std::vector<std::size_t>& indices);
Matrix patch_to_row(const Matrix& patch);

/// Features of the given samples through a frozen encoder, computed in
/// batches. Throws when the encoder's parameter store is trainable: stage-2
/// and evaluation consume frozen weights only.
Matrix extract_features(Encoder& encoder, const nn::ParamStore& store, const Matrix& patch_rows,
                        int height, int width, FeatureSource source, int batch_size = 256);

}  // namespace nodex::model
