#pragma once

#include <filesystem>

#include "nodex/data/types.hpp"
#include "nodex/model/features.hpp"

namespace nodex::eval {

/// Top-2 principal components of the (centred) feature rows, sign-fixed so
/// the largest-magnitude loading of each component is positive. Stands in
/// for the delegated projection step; an external t-SNE can be run on the
/// exported table instead.
Matrix pca_project_2d(const Matrix& features);

/// Writes one TSV row per test image: nodule id, reader id, ground-truth
/// labels, the stored 2D projection, then the full feature vector. A sidecar
/// embeddings_meta.json records the format version and projection method.
void export_embeddings(model::Encoder& encoder, const nn::ParamStore& encoder_store,
                       const data::Dataset& dataset, const data::DatasetSplit& split,
                       model::FeatureSource source, const std::filesystem::path& tsv_path);

}  // namespace nodex::eval
