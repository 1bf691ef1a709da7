#include "nodex/data/dataset_io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "nodex/io/csv.hpp"
#include "nodex/io/npy.hpp"

namespace nodex::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream f(path);
  NODEX_REQUIRE(f.good(), "cannot open " + path.string());
  json j;
  f >> j;
  return j;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream f(path);
  NODEX_REQUIRE(f.good(), "cannot open " + path.string());
  f << j.dump(2) << "\n";
}

std::string fraction_token(Scalar fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", fraction);
  return buf;
}

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& dir, const DatasetMeta& meta) {
  fs::create_directories(dir / "patches");

  json dj;
  dj["format_version"] = meta.format_version;
  dj["kind"] = meta.kind;
  dj["patch_size"] = meta.patch_size;
  dj["n_samples"] = ds.samples.size();
  dj["n_nodules"] = ds.n_nodules();
  if (meta.intensity_window)
    dj["intensity_window"] = {meta.intensity_window->first, meta.intensity_window->second};
  write_json_file(dir / "dataset.json", dj);

  io::CsvTable table;
  table.header = {"nodule_id", "reader_id"};
  for (const char* a : kAttributeNames) table.header.push_back(a);
  table.header.push_back("malignancy");
  table.header.push_back("reader_count");
  for (const auto& s : ds.samples) {
    const NoduleLabels& labels = ds.labels_for(s.nodule_id);
    std::vector<std::string> row = {s.nodule_id, s.reader_id};
    for (int a = 0; a < kNumAttributes; ++a)
      row.push_back(std::to_string(labels.attributes[static_cast<std::size_t>(a)]));
    row.push_back(to_string(labels.malignancy));
    row.push_back(std::to_string(labels.reader_count));
    table.rows.push_back(std::move(row));
    io::write_npy_matrix(dir / "patches" / (s.nodule_id + "_" + s.reader_id + ".npy"), s.patch);
  }
  io::write_csv(dir / "annotations.csv", table);
}

Dataset load_dataset(const fs::path& dir, DatasetMeta* meta_out) {
  json dj = read_json_file(dir / "dataset.json");
  NODEX_REQUIRE(dj.at("format_version").get<int>() == 1,
                "load_dataset: unsupported format_version in " + dir.string());
  if (meta_out) {
    meta_out->format_version = dj.at("format_version").get<int>();
    meta_out->patch_size = dj.at("patch_size").get<int>();
    meta_out->kind = dj.value("kind", std::string("processed"));
    if (dj.contains("intensity_window"))
      meta_out->intensity_window = {dj["intensity_window"][0].get<Scalar>(),
                                    dj["intensity_window"][1].get<Scalar>()};
  }

  io::CsvTable table = io::read_csv(dir / "annotations.csv");
  int col_nodule = table.require_column("nodule_id");
  int col_reader = table.require_column("reader_id");
  int col_mal = table.require_column("malignancy");
  int col_readers = table.require_column("reader_count");
  std::array<int, kNumAttributes> col_attr{};
  for (int a = 0; a < kNumAttributes; ++a)
    col_attr[static_cast<std::size_t>(a)] = table.require_column(kAttributeNames[a]);

  Dataset ds;
  for (const auto& row : table.rows) {
    const std::string& nodule_id = row[static_cast<std::size_t>(col_nodule)];
    const std::string& reader_id = row[static_cast<std::size_t>(col_reader)];
    NoduleLabels labels;
    for (int a = 0; a < kNumAttributes; ++a)
      labels.attributes[static_cast<std::size_t>(a)] =
          std::stoi(row[static_cast<std::size_t>(col_attr[static_cast<std::size_t>(a)])]);
    labels.malignancy = malignancy_from_string(row[static_cast<std::size_t>(col_mal)]);
    labels.reader_count = std::stoi(row[static_cast<std::size_t>(col_readers)]);

    auto it = ds.labels.find(nodule_id);
    if (it == ds.labels.end()) {
      ds.labels[nodule_id] = labels;
    } else {
      NODEX_REQUIRE(it->second.attributes == labels.attributes &&
                        it->second.malignancy == labels.malignancy,
                    "load_dataset: inconsistent labels for nodule " + nodule_id);
    }
    Matrix patch = io::read_npy_matrix(dir / "patches" / (nodule_id + "_" + reader_id + ".npy"));
    ds.samples.push_back({nodule_id, reader_id, std::move(patch)});
  }
  return ds;
}

void save_split(const DatasetSplit& split, const fs::path& dataset_dir) {
  json j;
  j["format_version"] = 1;
  j["seed"] = split.seed;
  j["stratified"] = split.stratified;
  j["train_nodule_ids"] = split.train_nodule_ids;
  j["test_nodule_ids"] = split.test_nodule_ids;
  write_json_file(dataset_dir / "splits.json", j);
}

DatasetSplit load_split(const fs::path& dataset_dir) {
  json j = read_json_file(dataset_dir / "splits.json");
  NODEX_REQUIRE(j.at("format_version").get<int>() == 1, "splits.json: unsupported version");
  DatasetSplit split;
  split.seed = j.at("seed").get<std::uint64_t>();
  split.stratified = j.value("stratified", false);
  for (const auto& id : j.at("train_nodule_ids")) split.train_nodule_ids.insert(id.get<std::string>());
  for (const auto& id : j.at("test_nodule_ids")) split.test_nodule_ids.insert(id.get<std::string>());
  return split;
}

fs::path mask_path(const fs::path& dataset_dir, Scalar fraction, std::uint64_t seed) {
  return dataset_dir / "masks" /
         (fraction_token(fraction) + "_" + std::to_string(seed) + ".json");
}

void save_mask(const AnnotationMask& mask, const fs::path& dataset_dir) {
  fs::create_directories(dataset_dir / "masks");
  json j;
  j["format_version"] = 1;
  j["fraction"] = mask.fraction;
  j["seed"] = mask.seed;
  j["annotated_ids"] = mask.annotated_ids;
  write_json_file(mask_path(dataset_dir, mask.fraction, mask.seed), j);
}

AnnotationMask load_mask(const fs::path& dataset_dir, Scalar fraction, std::uint64_t seed) {
  json j = read_json_file(mask_path(dataset_dir, fraction, seed));
  NODEX_REQUIRE(j.at("format_version").get<int>() == 1, "mask: unsupported version");
  AnnotationMask mask;
  mask.fraction = j.at("fraction").get<Scalar>();
  mask.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& id : j.at("annotated_ids")) mask.annotated_ids.insert(id.get<std::string>());
  return mask;
}

RawCohort load_raw_cohort(const fs::path& dir) {
  RawCohort cohort;

  io::CsvTable scans = io::read_csv(dir / "scans.csv");
  int s_id = scans.require_column("scan_id");
  int s_thick = scans.require_column("slice_thickness_mm");
  int s_z = scans.require_column("spacing_z");
  int s_y = scans.require_column("spacing_y");
  int s_x = scans.require_column("spacing_x");
  std::map<std::string, Scalar> thickness;
  for (const auto& row : scans.rows) {
    const std::string& scan_id = row[static_cast<std::size_t>(s_id)];
    const std::string& thick = row[static_cast<std::size_t>(s_thick)];
    thickness[scan_id] = thick.empty() ? -1.0 : std::stod(thick);

    fs::path vol_path = dir / "volumes" / (scan_id + ".npy");
    io::NpyArray arr = io::read_npy(vol_path);
    NODEX_REQUIRE(arr.shape.size() == 3, "raw cohort: volume must be 3D: " + vol_path.string());
    Volume vol;
    vol.nz = arr.shape[0];
    vol.ny = arr.shape[1];
    vol.nx = arr.shape[2];
    vol.spacing_z = std::stod(row[static_cast<std::size_t>(s_z)]);
    vol.spacing_y = std::stod(row[static_cast<std::size_t>(s_y)]);
    vol.spacing_x = std::stod(row[static_cast<std::size_t>(s_x)]);
    vol.values = std::move(arr.data);
    cohort.volumes.emplace(scan_id, std::move(vol));
  }

  io::CsvTable anns = io::read_csv(dir / "annotations.csv");
  int a_nodule = anns.require_column("nodule_id");
  int a_scan = anns.require_column("scan_id");
  int a_reader = anns.require_column("reader_id");
  int a_mal = anns.require_column("malignancy");
  int a_cz = anns.require_column("centroid_z");
  int a_cy = anns.require_column("centroid_y");
  int a_cx = anns.require_column("centroid_x");
  std::array<int, kNumAttributes> a_attr{};
  for (int a = 0; a < kNumAttributes; ++a)
    a_attr[static_cast<std::size_t>(a)] = anns.require_column(kAttributeNames[a]);

  for (const auto& row : anns.rows) {
    RawNoduleAnnotation rec;
    rec.nodule_id = row[static_cast<std::size_t>(a_nodule)];
    rec.reader_id = row[static_cast<std::size_t>(a_reader)];
    const std::string& scan_id = row[static_cast<std::size_t>(a_scan)];
    for (int a = 0; a < kNumAttributes; ++a)
      rec.attribute_scores[kAttributeNames[a]] =
          std::stoi(row[static_cast<std::size_t>(a_attr[static_cast<std::size_t>(a)])]);
    rec.malignancy_score = std::stoi(row[static_cast<std::size_t>(a_mal)]);
    rec.centroid_z = std::stod(row[static_cast<std::size_t>(a_cz)]);
    rec.centroid_y = std::stod(row[static_cast<std::size_t>(a_cy)]);
    rec.centroid_x = std::stod(row[static_cast<std::size_t>(a_cx)]);
    auto t = thickness.find(scan_id);
    rec.slice_thickness_mm = t == thickness.end() ? -1.0 : t->second;
    rec.validate();
    auto prev = cohort.nodule_scan.find(rec.nodule_id);
    NODEX_CHECK(prev == cohort.nodule_scan.end() || prev->second == scan_id,
                "raw cohort: nodule " + rec.nodule_id + " maps to multiple scans");
    cohort.nodule_scan[rec.nodule_id] = scan_id;
    cohort.annotations.push_back(std::move(rec));
  }
  return cohort;
}

void save_raw_cohort(const RawCohort& cohort, const fs::path& dir) {
  fs::create_directories(dir / "volumes");

  io::CsvTable scans;
  scans.header = {"scan_id", "slice_thickness_mm", "spacing_z", "spacing_y", "spacing_x"};
  std::map<std::string, Scalar> thickness;
  for (const auto& rec : cohort.annotations) {
    auto it = cohort.nodule_scan.find(rec.nodule_id);
    if (it != cohort.nodule_scan.end()) thickness[it->second] = rec.slice_thickness_mm;
  }
  for (const auto& [scan_id, vol] : cohort.volumes) {
    char thick[32];
    auto t = thickness.find(scan_id);
    if (t == thickness.end() || t->second < 0)
      thick[0] = '\0';
    else
      std::snprintf(thick, sizeof(thick), "%g", t->second);
    char sz[32], sy[32], sx[32];
    std::snprintf(sz, sizeof(sz), "%g", vol.spacing_z);
    std::snprintf(sy, sizeof(sy), "%g", vol.spacing_y);
    std::snprintf(sx, sizeof(sx), "%g", vol.spacing_x);
    scans.rows.push_back({scan_id, thick, sz, sy, sx});
    io::write_npy(dir / "volumes" / (scan_id + ".npy"), {vol.nz, vol.ny, vol.nx}, vol.values);
  }
  io::write_csv(dir / "scans.csv", scans);

  io::CsvTable anns;
  anns.header = {"nodule_id", "scan_id", "reader_id"};
  for (const char* a : kAttributeNames) anns.header.push_back(a);
  anns.header.insert(anns.header.end(), {"malignancy", "centroid_z", "centroid_y", "centroid_x"});
  for (const auto& rec : cohort.annotations) {
    std::vector<std::string> row = {rec.nodule_id, cohort.nodule_scan.at(rec.nodule_id),
                                    rec.reader_id};
    for (const char* a : kAttributeNames) row.push_back(std::to_string(rec.attribute_scores.at(a)));
    row.push_back(std::to_string(rec.malignancy_score));
    char cz[32], cy[32], cx[32];
    std::snprintf(cz, sizeof(cz), "%g", rec.centroid_z);
    std::snprintf(cy, sizeof(cy), "%g", rec.centroid_y);
    std::snprintf(cx, sizeof(cx), "%g", rec.centroid_x);
    row.insert(row.end(), {cz, cy, cx});
    anns.rows.push_back(std::move(row));
  }
  io::write_csv(dir / "annotations.csv", anns);
}

}  // namespace nodex::data
