#pragma once

#include <optional>

#include "nodex/data/types.hpp"
#include "nodex/data/volume.hpp"

namespace nodex::data {

/// Median of integer ordinal scores. Even counts round half away from the
/// low end (median of {1,2} is 2) so labels stay on the ordinal grid.
int median_ordinal(std::vector<int> scores);

struct FilterResult {
  std::vector<RawNoduleAnnotation> kept;
  std::vector<std::string> rejected;  // diagnostics for records missing thickness metadata
  std::size_t discarded_thick = 0;    // records on scans thicker than the cutoff
};

/// Keeps records with slice thickness <= cutoff (non-strict boundary).
/// Records without thickness metadata are rejected with a diagnostic.
FilterResult filter_scans(const std::vector<RawNoduleAnnotation>& records,
                          Scalar max_thickness_mm = 2.5);

/// Aggregates one nodule's reader annotations: per-attribute median, and
/// malignancy binarised at 3 (median >3 malignant, <3 benign, =3 excluded).
/// Nodules with fewer than 3 readers are dropped (nullopt). Throws on empty
/// input or mixed nodule ids.
std::optional<NoduleLabels> aggregate_nodule(const std::vector<RawNoduleAnnotation>& annotations);

/// 70/30 nodule-level split, deterministic in the seed. With `stratified`,
/// the fraction is applied per malignancy stratum.
DatasetSplit split_nodules(const Dataset& ds, std::uint64_t seed, bool stratified = false,
                           Scalar train_fraction = 0.7);

/// Uniform subset of train nodule ids of size round(fraction * |train|).
/// Masks are nested: the annotated set for a smaller fraction is a prefix of
/// the same seeded permutation, so sweeps are monotone per seed.
AnnotationMask mask_annotations(const DatasetSplit& split, Scalar fraction, std::uint64_t seed);

struct PreprocessOptions {
  Scalar max_thickness_mm = 2.5;
  Scalar window_lo = -1000.0;  // intensity clip window before [0,1] scaling
  Scalar window_hi = 400.0;
};

struct RawCohort {
  std::vector<RawNoduleAnnotation> annotations;
  std::map<std::string, Volume> volumes;          // scan_id -> volume
  std::map<std::string, std::string> nodule_scan;  // nodule_id -> scan_id
};

/// Full preprocessing chain: thickness filter, isotropic resampling,
/// >=3-reader aggregation, per-annotation patch extraction with windowed
/// normalisation. Centroids are given in original voxel coordinates and are
/// mapped through the resampling.
Dataset preprocess_cohort(const RawCohort& cohort, const PreprocessOptions& opts,
                          std::vector<std::string>* diagnostics = nullptr);

}  // namespace nodex::data
