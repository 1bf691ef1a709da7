#pragma once

#include <filesystem>
#include <optional>

#include "nodex/data/preprocess.hpp"
#include "nodex/data/types.hpp"

namespace nodex::data {

/// Processed dataset directory layout (all formats carry format_version):
///   dataset.json                     counts + patch size + intensity window
///   annotations.csv                  one row per reader annotation, with the
///                                    nodule's aggregated labels
///   patches/<nodule>_<reader>.npy    32x32 little-endian float arrays
///   splits.json                      train/test nodule ids
///   masks/<fraction>_<seed>.json     annotated nodule ids

struct DatasetMeta {
  int format_version = 1;
  int patch_size = kPatchSize;
  std::optional<std::pair<Scalar, Scalar>> intensity_window;
  std::string kind = "processed";  // or "synthetic"
};

void save_dataset(const Dataset& ds, const std::filesystem::path& dir,
                  const DatasetMeta& meta = {});
Dataset load_dataset(const std::filesystem::path& dir, DatasetMeta* meta_out = nullptr);

void save_split(const DatasetSplit& split, const std::filesystem::path& dataset_dir);
DatasetSplit load_split(const std::filesystem::path& dataset_dir);

std::filesystem::path mask_path(const std::filesystem::path& dataset_dir, Scalar fraction,
                                std::uint64_t seed);
void save_mask(const AnnotationMask& mask, const std::filesystem::path& dataset_dir);
AnnotationMask load_mask(const std::filesystem::path& dataset_dir, Scalar fraction,
                         std::uint64_t seed);

/// Raw cohort directory (input to `preprocess`):
///   scans.csv        scan_id,slice_thickness_mm,spacing_z,spacing_y,spacing_x
///   volumes/<scan_id>.npy   3D arrays in (z,y,x) order
///   annotations.csv  nodule_id,scan_id,reader_id,<8 attribute scores>,
///                    malignancy,centroid_z,centroid_y,centroid_x
RawCohort load_raw_cohort(const std::filesystem::path& dir);
void save_raw_cohort(const RawCohort& cohort, const std::filesystem::path& dir);

}  // namespace nodex::data
