#include <doctest.h>

#include <filesystem>

#include "nodex/data/dataset_io.hpp"
#include "nodex/data/preprocess.hpp"
#include "nodex/data/synthetic.hpp"
#include "nodex/rng.hpp"

using namespace nodex;
using namespace nodex::data;
namespace fs = std::filesystem;

namespace {

RawNoduleAnnotation make_annotation(const std::string& nodule, const std::string& reader,
                                    int score, Scalar thickness) {
  RawNoduleAnnotation rec;
  rec.nodule_id = nodule;
  rec.reader_id = reader;
  for (int i = 0; i < kNumAttributes; ++i) rec.attribute_scores[kAttributeNames[i]] = 1;
  rec.malignancy_score = score;
  rec.slice_thickness_mm = thickness;
  return rec;
}

Dataset tiny_dataset(int n_nodules) {
  return generate_synthetic_dataset(n_nodules, 99, 1);
}

}  // namespace

TEST_CASE("median_ordinal: odd, even and rounding rule") {
  CHECK(median_ordinal({1, 2, 5}) == 2);
  CHECK(median_ordinal({4}) == 4);
  CHECK(median_ordinal({1, 2}) == 2);        // half rounds away from the low end
  CHECK(median_ordinal({2, 3, 4, 5}) == 4);  // 3.5 -> 4
  CHECK(median_ordinal({2, 2, 4, 4}) == 3);  // exact 3 stays
}

TEST_CASE("filter_scans: thickness rule and diagnostics") {
  std::vector<RawNoduleAnnotation> records = {
      make_annotation("n1", "r1", 3, 3.0), make_annotation("n2", "r1", 3, 2.5),
      make_annotation("n3", "r1", 3, 1.0), make_annotation("n4", "r1", 3, 2.6),
      make_annotation("n5", "r1", 3, -1.0)};
  auto res = filter_scans(records);
  REQUIRE(res.kept.size() == 2);
  CHECK(res.kept[0].nodule_id == "n2");  // 2.5 retained, boundary is non-strict
  CHECK(res.kept[1].nodule_id == "n3");
  CHECK(res.discarded_thick == 2);  // 3.0 and 2.6 removed
  REQUIRE(res.rejected.size() == 1);
  CHECK(res.rejected[0].find("n5") != std::string::npos);
}

TEST_CASE("aggregate_nodule: binarisation and reader threshold") {
  auto mk = [](std::initializer_list<int> scores) {
    std::vector<RawNoduleAnnotation> anns;
    int r = 0;
    for (int s : scores) anns.push_back(make_annotation("n", "r" + std::to_string(r++), s, 1.0));
    return anns;
  };

  auto malignant = aggregate_nodule(mk({4, 5, 4}));
  REQUIRE(malignant.has_value());
  CHECK(malignant->malignancy == Malignancy::malignant);

  auto excluded = aggregate_nodule(mk({3, 3, 3}));
  REQUIRE(excluded.has_value());
  CHECK(excluded->malignancy == Malignancy::excluded);

  auto benign = aggregate_nodule(mk({1, 2, 2}));
  REQUIRE(benign.has_value());
  CHECK(benign->malignancy == Malignancy::benign);

  CHECK_FALSE(aggregate_nodule(mk({4, 4})).has_value());  // < 3 readers dropped
  CHECK_THROWS_AS(aggregate_nodule({}), InvalidInput);

  // Attribute median {1,2,5} -> 2.
  auto anns = mk({4, 4, 4});
  anns[0].attribute_scores["subtlety"] = 1;
  anns[1].attribute_scores["subtlety"] = 2;
  anns[2].attribute_scores["subtlety"] = 5;
  auto agg = aggregate_nodule(anns);
  REQUIRE(agg.has_value());
  CHECK(agg->attributes[0] == 2);
  CHECK(agg->reader_count == 3);
}

TEST_CASE("aggregate_nodule: idempotence on identical scores") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    int score = static_cast<int>(rng.uniform_int(1, 5));
    std::vector<RawNoduleAnnotation> anns;
    for (int r = 0; r < 3; ++r) {
      auto a = make_annotation("n", "r" + std::to_string(r), score, 1.0);
      for (int i = 0; i < kNumAttributes; ++i) {
        int s = static_cast<int>(rng.uniform_int(1, kAttributeClassCounts[i]));
        a.attribute_scores[kAttributeNames[i]] = s;
      }
      anns.push_back(a);
    }
    // All readers agree per attribute by construction below.
    for (int i = 0; i < kNumAttributes; ++i) {
      int s = anns[0].attribute_scores[kAttributeNames[i]];
      anns[1].attribute_scores[kAttributeNames[i]] = s;
      anns[2].attribute_scores[kAttributeNames[i]] = s;
    }
    auto agg = aggregate_nodule(anns);
    REQUIRE(agg.has_value());
    for (int i = 0; i < kNumAttributes; ++i)
      CHECK(agg->attributes[static_cast<std::size_t>(i)] ==
            anns[0].attribute_scores[kAttributeNames[i]]);
  }
}

TEST_CASE("resample: already isotropic volume passes through") {
  Volume v;
  v.nz = v.ny = v.nx = 4;
  v.values.assign(64, 0.0);
  for (std::size_t i = 0; i < 64; ++i) v.values[i] = static_cast<Scalar>(i);
  Volume out = resample_to_isotropic(v);
  CHECK(out.nz == 4);
  CHECK(out.values == v.values);
}

TEST_CASE("resample: constant volume doubles slice count at 2mm spacing") {
  Volume v;
  v.nz = 10;
  v.ny = v.nx = 4;
  v.spacing_z = 2.0;
  v.values.assign(v.size(), 7.5);
  Volume out = resample_to_isotropic(v);
  CHECK(std::abs(static_cast<int>(out.nz) - 20) <= 1);  // ~20 slices
  CHECK(out.ny == 4);
  for (Scalar x : out.values) CHECK(x == doctest::Approx(7.5).epsilon(1e-12));
}

TEST_CASE("resample: linear ramp matches the analytic interpolation oracle") {
  // Input samples v(z) = 3z_mm + 1 on a 2mm grid; the resampled 1mm grid
  // must land exactly on the same line.
  Volume v;
  v.nz = 6;
  v.ny = v.nx = 2;
  v.spacing_z = 2.0;
  v.values.resize(v.size());
  for (std::size_t z = 0; z < v.nz; ++z)
    for (std::size_t y = 0; y < v.ny; ++y)
      for (std::size_t x = 0; x < v.nx; ++x)
        v.at(z, y, x) = 3.0 * (2.0 * static_cast<Scalar>(z)) + 1.0;
  Volume out = resample_to_isotropic(v);
  REQUIRE(out.nz == 11);  // floor((6-1)*2)+1
  for (std::size_t z = 0; z < out.nz; ++z) {
    Scalar expected = 3.0 * static_cast<Scalar>(z) + 1.0;  // closed form at z mm
    CHECK(out.at(z, 0, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("resample: output stays inside the input intensity range") {
  Rng rng(11);
  Volume v;
  v.nz = 5;
  v.ny = 6;
  v.nx = 7;
  v.spacing_z = 1.7;
  v.spacing_y = 0.8;
  v.spacing_x = 2.3;
  v.values.resize(v.size());
  for (auto& x : v.values) x = rng.uniform(-100.0, 300.0);
  Scalar lo = *std::min_element(v.values.begin(), v.values.end());
  Scalar hi = *std::max_element(v.values.begin(), v.values.end());
  Volume out = resample_to_isotropic(v);
  for (Scalar x : out.values) {
    CHECK(x >= lo - 1e-9);
    CHECK(x <= hi + 1e-9);
  }
}

TEST_CASE("resample: degenerate axis raises") {
  Volume v;
  v.nz = 0;
  v.ny = v.nx = 3;
  CHECK_THROWS_AS(resample_to_isotropic(v), InvalidInput);
}

TEST_CASE("extract_patch: centre, padding and the impulse oracle") {
  Volume v;
  v.nz = v.ny = v.nx = 64;
  v.values.assign(v.size(), 2.0);

  Matrix centre = extract_patch(v, 32, 32, 32);
  CHECK(centre.rows() == 32);
  CHECK((centre.array() == 2.0).all());

  // Centroid 8 voxels from the edge: a zero band appears on the low side.
  Matrix edge = extract_patch(v, 32, 8, 32);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 32; ++c) CHECK(edge(r, c) == 0.0);
  for (int r = 8; r < 32; ++r)
    for (int c = 0; c < 32; ++c) CHECK(edge(r, c) == 2.0);

  // Impulse at the centroid lands at (16,16): patch(r,c) = slice[cy-16+r][cx-16+c].
  Volume imp;
  imp.nz = 3;
  imp.ny = imp.nx = 64;
  imp.values.assign(imp.size(), 0.0);
  imp.at(1, 40, 23) = 9.0;
  Matrix p = extract_patch(imp, 1, 40, 23);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) {
      // Index-arithmetic oracle evaluated independently.
      Scalar expected = (40 - 16 + r == 40 && 23 - 16 + c == 23) ? 9.0 : 0.0;
      CHECK(p(r, c) == expected);
    }
  CHECK(p(16, 16) == 9.0);

  CHECK_THROWS_AS(extract_patch(imp, 5, 0, 0), InvalidInput);  // centroid outside
}

TEST_CASE("normalize_window clips and rescales to [0,1]") {
  Matrix m(1, 3);
  m << -2000.0, -300.0, 900.0;
  Matrix out = normalize_window(m, -1000.0, 400.0);
  CHECK(out(0, 0) == 0.0);
  CHECK(out(0, 1) == doctest::Approx(700.0 / 1400.0));
  CHECK(out(0, 2) == 1.0);
}

TEST_CASE("split_nodules: fractions, determinism, disjointness") {
  Dataset ds = tiny_dataset(10);
  DatasetSplit s1 = split_nodules(ds, 42);
  DatasetSplit s2 = split_nodules(ds, 42);
  CHECK(s1.train_nodule_ids.size() == 7);
  CHECK(s1.test_nodule_ids.size() == 3);
  CHECK(s1.train_nodule_ids == s2.train_nodule_ids);
  for (const auto& id : s1.train_nodule_ids) CHECK_FALSE(s1.test_nodule_ids.count(id));
  DatasetSplit s3 = split_nodules(ds, 43);
  CHECK(s3.train_nodule_ids != s1.train_nodule_ids);
}

TEST_CASE("split_nodules: stratified mode splits per malignancy class") {
  Dataset ds = tiny_dataset(60);
  DatasetSplit s = split_nodules(ds, 7, /*stratified=*/true);
  std::map<Malignancy, std::pair<int, int>> counts;  // train/test per class
  for (const auto& [id, labels] : ds.labels) {
    if (s.train_nodule_ids.count(id))
      counts[labels.malignancy].first++;
    else
      counts[labels.malignancy].second++;
  }
  for (const auto& [cls, c] : counts) {
    int total = c.first + c.second;
    CHECK(c.first == static_cast<int>(std::llround(0.7 * total)));
  }
}

TEST_CASE("mask_annotations: sizes, determinism, nesting") {
  DatasetSplit split;
  for (int i = 0; i < 518; ++i) split.train_nodule_ids.insert("n" + std::to_string(i));

  auto full = mask_annotations(split, 1.0, 5);
  CHECK(full.annotated_ids == split.train_nodule_ids);

  auto one_pct = mask_annotations(split, 0.01, 5);
  CHECK(one_pct.annotated_ids.size() == 5);  // round(0.01 * 518)

  CHECK(mask_annotations(split, 0.01, 5).annotated_ids == one_pct.annotated_ids);
  CHECK(mask_annotations(split, 0.01, 6).annotated_ids != one_pct.annotated_ids);

  // Nesting: smaller fractions are prefixes of the same permutation.
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    Scalar f1 = rng.uniform(0.01, 0.5);
    Scalar f2 = rng.uniform(f1, 1.0);
    auto m1 = mask_annotations(split, f1, 77);
    auto m2 = mask_annotations(split, f2, 77);
    for (const auto& id : m1.annotated_ids) CHECK(m2.annotated_ids.count(id));
  }

  DatasetSplit small;
  small.train_nodule_ids = {"a", "b", "c"};
  CHECK_THROWS_AS(mask_annotations(small, 0.01, 1), InvalidInput);  // size 0
}

TEST_CASE("synthetic: fixed seed reproduces the dataset bit-exactly") {
  auto a = generate_synthetic_dataset(12, 4, 2);
  auto b = generate_synthetic_dataset(12, 4, 2);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].nodule_id == b.samples[i].nodule_id);
    CHECK((a.samples[i].patch - b.samples[i].patch).cwiseAbs().maxCoeff() == 0.0);
  }
  auto c = generate_synthetic_dataset(12, 5, 2);
  CHECK((c.samples[0].patch - a.samples[0].patch).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("synthetic: sharp margins have steeper boundary gradients") {
  std::array<int, kNumAttributes> attrs{3, 1, 6, 5, 5, 1, 1, 5};
  auto grad_mean = [](const Matrix& p) {
    Scalar g = 0;
    for (Eigen::Index r = 1; r < p.rows(); ++r)
      for (Eigen::Index c = 1; c < p.cols(); ++c)
        g += std::abs(p(r, c) - p(r - 1, c)) + std::abs(p(r, c) - p(r, c - 1));
    return g / static_cast<Scalar>((p.rows() - 1) * (p.cols() - 1));
  };
  auto sharp_attrs = attrs;
  sharp_attrs[static_cast<std::size_t>(attribute_index("margin"))] = 5;
  auto blurry_attrs = attrs;
  blurry_attrs[static_cast<std::size_t>(attribute_index("margin"))] = 1;
  Matrix sharp = render_synthetic_patch(sharp_attrs, 10, 20);
  Matrix blurry = render_synthetic_patch(blurry_attrs, 10, 20);
  CHECK(grad_mean(sharp) > grad_mean(blurry));
}

TEST_CASE("synthetic: malignancy equals the documented rule") {
  auto nodules = generate_synthetic_nodules(50, 8);
  for (const auto& nod : nodules) {
    CHECK(nod.labels.malignancy == synthetic_malignancy_rule(nod.labels.attributes));
    // Trichotomy: every nodule maps to exactly one state.
    int risk = nod.labels.attributes[6] + nod.labels.attributes[5] +
               (6 - nod.labels.attributes[4]);
    if (risk >= 10) CHECK(nod.labels.malignancy == Malignancy::malignant);
    if (risk <= 8) CHECK(nod.labels.malignancy == Malignancy::benign);
    if (risk == 9) CHECK(nod.labels.malignancy == Malignancy::excluded);
  }
}

TEST_CASE("dataset io: save and load round trip") {
  fs::path dir = fs::temp_directory_path() / "nodex_test_dsio";
  fs::remove_all(dir);
  Dataset ds = generate_synthetic_dataset(10, 21, 3);
  DatasetMeta meta;
  meta.kind = "synthetic";
  save_dataset(ds, dir, meta);

  DatasetMeta back_meta;
  Dataset back = load_dataset(dir, &back_meta);
  CHECK(back_meta.kind == "synthetic");
  REQUIRE(back.samples.size() == ds.samples.size());
  CHECK(back.n_nodules() == ds.n_nodules());
  for (const auto& [id, labels] : ds.labels) {
    CHECK(back.labels_for(id).attributes == labels.attributes);
    CHECK(back.labels_for(id).malignancy == labels.malignancy);
  }
  // float32 on disk
  CHECK((back.samples[0].patch - ds.samples[0].patch).cwiseAbs().maxCoeff() < 1e-6);

  // Split and mask persistence.
  DatasetSplit split = split_nodules(ds, 3);
  save_split(split, dir);
  DatasetSplit split_back = load_split(dir);
  CHECK(split_back.train_nodule_ids == split.train_nodule_ids);
  CHECK(split_back.test_nodule_ids == split.test_nodule_ids);

  AnnotationMask mask = mask_annotations(split, 0.5, 9);
  save_mask(mask, dir);
  AnnotationMask mask_back = load_mask(dir, 0.5, 9);
  CHECK(mask_back.annotated_ids == mask.annotated_ids);
}

TEST_CASE("preprocess_cohort: full chain on a miniature raw cohort") {
  RawCohort cohort;
  Volume vol;
  vol.nz = 4;
  vol.ny = vol.nx = 48;
  vol.spacing_z = 2.0;
  vol.spacing_y = vol.spacing_x = 1.0;
  vol.values.assign(vol.size(), -1000.0);
  // A bright blob at (z=1, y=24, x=24) in voxel coordinates.
  for (long dy = -2; dy <= 2; ++dy)
    for (long dx = -2; dx <= 2; ++dx) vol.at(1, 24 + dy, 24 + dx) = 200.0;
  cohort.volumes["scan1"] = vol;

  Volume thick = vol;
  thick.spacing_z = 3.0;
  cohort.volumes["scan2"] = thick;

  auto add = [&](const std::string& nodule, const std::string& scan, int readers,
                 Scalar thickness) {
    for (int r = 0; r < readers; ++r) {
      auto a = make_annotation(nodule, "r" + std::to_string(r), 4, thickness);
      a.centroid_z = 1;
      a.centroid_y = 24;
      a.centroid_x = 24;
      cohort.annotations.push_back(a);
    }
    cohort.nodule_scan[nodule] = scan;
  };
  add("good", "scan1", 3, 2.0);
  add("few_readers", "scan1", 2, 2.0);
  add("thick", "scan2", 3, 3.0);

  std::vector<std::string> diags;
  Dataset ds = preprocess_cohort(cohort, {}, &diags);
  CHECK(ds.n_nodules() == 1);
  CHECK(ds.samples.size() == 3);  // one patch per reader annotation
  CHECK(ds.labels_for("good").malignancy == Malignancy::malignant);
  // The blob sits at the patch centre and is normalised into (0,1].
  const Matrix& patch = ds.samples[0].patch;
  CHECK(patch(16, 16) > 0.8);
  CHECK(patch(0, 0) == 0.0);
  CHECK(diags.size() >= 2);  // dropped nodule + thick-scan note

  // Round trip through the raw-cohort format.
  fs::path dir = fs::temp_directory_path() / "nodex_test_rawio";
  fs::remove_all(dir);
  save_raw_cohort(cohort, dir);
  RawCohort back = load_raw_cohort(dir);
  CHECK(back.annotations.size() == cohort.annotations.size());
  CHECK(back.volumes.size() == 2);
  Dataset ds2 = preprocess_cohort(back, {});
  CHECK(ds2.samples.size() == 3);
}
