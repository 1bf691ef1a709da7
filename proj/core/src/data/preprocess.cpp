#include "nodex/data/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "nodex/rng.hpp"

namespace nodex::data {

int median_ordinal(std::vector<int> scores) {
  NODEX_CHECK(!scores.empty(), "median_ordinal: empty input");
  std::sort(scores.begin(), scores.end());
  std::size_t n = scores.size();
  if (n % 2 == 1) return scores[n / 2];
  int a = scores[n / 2 - 1];
  int b = scores[n / 2];
  int sum = a + b;
  // Half-integer medians round up (away from the low end).
  return (sum % 2 == 0) ? sum / 2 : (sum + 1) / 2;
}

FilterResult filter_scans(const std::vector<RawNoduleAnnotation>& records,
                          Scalar max_thickness_mm) {
  FilterResult out;
  for (const auto& rec : records) {
    if (rec.slice_thickness_mm < 0) {
      out.rejected.push_back("nodule " + rec.nodule_id + " reader " + rec.reader_id +
                             ": missing slice thickness metadata");
      continue;
    }
    if (rec.slice_thickness_mm > max_thickness_mm) {
      ++out.discarded_thick;
      continue;
    }
    out.kept.push_back(rec);
  }
  return out;
}

std::optional<NoduleLabels> aggregate_nodule(
    const std::vector<RawNoduleAnnotation>& annotations) {
  NODEX_CHECK(!annotations.empty(), "aggregate_nodule: empty input");
  const std::string& id = annotations.front().nodule_id;
  for (const auto& a : annotations)
    NODEX_CHECK(a.nodule_id == id, "aggregate_nodule: mixed nodule ids");

  if (annotations.size() < 3) return std::nullopt;

  NoduleLabels labels;
  labels.reader_count = static_cast<int>(annotations.size());
  for (int i = 0; i < kNumAttributes; ++i) {
    std::vector<int> scores;
    scores.reserve(annotations.size());
    for (const auto& a : annotations) {
      auto it = a.attribute_scores.find(kAttributeNames[i]);
      NODEX_CHECK(it != a.attribute_scores.end(),
                  std::string("aggregate_nodule: missing attribute ") + kAttributeNames[i]);
      scores.push_back(it->second);
    }
    labels.attributes[static_cast<std::size_t>(i)] = median_ordinal(scores);
  }

  std::vector<int> mal;
  mal.reserve(annotations.size());
  for (const auto& a : annotations) mal.push_back(a.malignancy_score);
  int med = median_ordinal(mal);
  labels.malignancy = med > 3   ? Malignancy::malignant
                      : med < 3 ? Malignancy::benign
                                : Malignancy::excluded;
  return labels;
}

namespace {

std::set<std::string> take_fraction(std::vector<std::string> ids, Scalar fraction, Rng& rng,
                                    std::vector<std::string>* rest) {
  rng.shuffle(ids);
  std::size_t n_train =
      static_cast<std::size_t>(std::llround(fraction * static_cast<Scalar>(ids.size())));
  std::set<std::string> train(ids.begin(), ids.begin() + static_cast<long>(n_train));
  if (rest)
    rest->insert(rest->end(), ids.begin() + static_cast<long>(n_train), ids.end());
  return train;
}

}  // namespace

DatasetSplit split_nodules(const Dataset& ds, std::uint64_t seed, bool stratified,
                           Scalar train_fraction) {
  NODEX_CHECK(ds.n_nodules() >= 2, "split_nodules: need at least 2 nodules");
  NODEX_CHECK(train_fraction > 0 && train_fraction < 1, "split_nodules: bad fraction");

  DatasetSplit split;
  split.seed = seed;
  split.stratified = stratified;

  Rng rng(derive_seed(seed, "split"));
  std::vector<std::string> test_ids;
  if (!stratified) {
    split.train_nodule_ids = take_fraction(ds.nodule_ids(), train_fraction, rng, &test_ids);
  } else {
    for (Malignancy m : {Malignancy::benign, Malignancy::malignant, Malignancy::excluded}) {
      std::vector<std::string> group;
      for (const auto& [id, labels] : ds.labels)
        if (labels.malignancy == m) group.push_back(id);
      if (group.empty()) continue;
      auto train = take_fraction(std::move(group), train_fraction, rng, &test_ids);
      split.train_nodule_ids.insert(train.begin(), train.end());
    }
  }
  split.test_nodule_ids.insert(test_ids.begin(), test_ids.end());
  return split;
}

AnnotationMask mask_annotations(const DatasetSplit& split, Scalar fraction, std::uint64_t seed) {
  NODEX_CHECK(fraction > 0 && fraction <= 1, "mask_annotations: fraction must be in (0,1]");
  std::vector<std::string> ids(split.train_nodule_ids.begin(), split.train_nodule_ids.end());
  // One fixed permutation per seed; every fraction takes a prefix of it.
  Rng rng(derive_seed(seed, "mask"));
  rng.shuffle(ids);
  std::size_t n =
      static_cast<std::size_t>(std::llround(fraction * static_cast<Scalar>(ids.size())));
  NODEX_CHECK(n >= 1, "mask_annotations: fraction selects zero annotated nodules");

  AnnotationMask mask;
  mask.fraction = fraction;
  mask.seed = seed;
  mask.annotated_ids.insert(ids.begin(), ids.begin() + static_cast<long>(n));
  return mask;
}

Dataset preprocess_cohort(const RawCohort& cohort, const PreprocessOptions& opts,
                          std::vector<std::string>* diagnostics) {
  FilterResult filtered = filter_scans(cohort.annotations, opts.max_thickness_mm);
  if (diagnostics) {
    for (const auto& d : filtered.rejected) diagnostics->push_back(d);
    if (filtered.discarded_thick > 0)
      diagnostics->push_back("discarded " + std::to_string(filtered.discarded_thick) +
                             " annotations on scans thicker than " +
                             std::to_string(opts.max_thickness_mm) + " mm");
  }

  // Resample each referenced scan once.
  std::map<std::string, Volume> resampled;
  for (const auto& rec : filtered.kept) {
    auto scan_it = cohort.nodule_scan.find(rec.nodule_id);
    NODEX_CHECK(scan_it != cohort.nodule_scan.end(),
                "preprocess: nodule " + rec.nodule_id + " has no scan mapping");
    const std::string& scan_id = scan_it->second;
    if (!resampled.count(scan_id)) {
      auto vol_it = cohort.volumes.find(scan_id);
      NODEX_CHECK(vol_it != cohort.volumes.end(), "preprocess: missing volume " + scan_id);
      resampled.emplace(scan_id, resample_to_isotropic(vol_it->second));
    }
  }

  std::map<std::string, std::vector<RawNoduleAnnotation>> by_nodule;
  for (const auto& rec : filtered.kept) by_nodule[rec.nodule_id].push_back(rec);

  Dataset ds;
  for (const auto& [nodule_id, anns] : by_nodule) {
    auto labels = aggregate_nodule(anns);
    if (!labels) {
      if (diagnostics)
        diagnostics->push_back("nodule " + nodule_id + ": dropped (fewer than 3 readers)");
      continue;
    }
    const Volume& orig = cohort.volumes.at(cohort.nodule_scan.at(nodule_id));
    const Volume& vol = resampled.at(cohort.nodule_scan.at(nodule_id));
    ds.labels[nodule_id] = *labels;
    for (const auto& ann : anns) {
      // Original voxel centroid -> mm == resampled voxel coordinate.
      Scalar cz = ann.centroid_z * orig.spacing_z;
      Scalar cy = ann.centroid_y * orig.spacing_y;
      Scalar cx = ann.centroid_x * orig.spacing_x;
      Matrix patch = extract_patch(vol, cz, cy, cx);
      ds.samples.push_back(
          {nodule_id, ann.reader_id, normalize_window(patch, opts.window_lo, opts.window_hi)});
    }
  }
  return ds;
}

}  // namespace nodex::data
