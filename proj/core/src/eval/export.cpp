#include "nodex/eval/export.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace nodex::eval {

Matrix pca_project_2d(const Matrix& features) {
  NODEX_CHECK(features.rows() >= 2, "pca: need at least 2 rows");
  Matrix centered = features.rowwise() - features.colwise().mean();
  Matrix cov = centered.transpose() * centered / static_cast<Scalar>(features.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  NODEX_REQUIRE(solver.info() == Eigen::Success, "pca: eigendecomposition failed");

  // Eigenvalues ascend; take the last two columns.
  Matrix components(features.cols(), 2);
  for (int c = 0; c < 2; ++c) {
    Vector v = solver.eigenvectors().col(features.cols() - 1 - c);
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0) v = -v;
    components.col(c) = v;
  }
  return centered * components;
}

void export_embeddings(model::Encoder& encoder, const nn::ParamStore& encoder_store,
                       const data::Dataset& dataset, const data::DatasetSplit& split,
                       model::FeatureSource source, const std::filesystem::path& tsv_path) {
  auto test_idx = dataset.sample_indices(split.test_nodule_ids);
  NODEX_CHECK(!test_idx.empty(), "export_embeddings: no test images");

  Matrix rows = model::patches_to_rows(dataset.samples, test_idx);
  int px = static_cast<int>(dataset.samples[test_idx[0]].patch.rows());
  Matrix features = model::extract_features(encoder, encoder_store, rows, px, px, source);
  Matrix proj = pca_project_2d(features);

  std::ofstream f(tsv_path);
  NODEX_REQUIRE(f.good(), "export_embeddings: cannot open " + tsv_path.string());
  f << "nodule_id\treader_id";
  for (const char* a : kAttributeNames) f << '\t' << a;
  f << "\tmalignancy\tproj_x\tproj_y";
  for (Eigen::Index d = 0; d < features.cols(); ++d) f << "\tf" << d;
  f << '\n';
  f.precision(17);
  for (std::size_t r = 0; r < test_idx.size(); ++r) {
    const auto& sample = dataset.samples[test_idx[r]];
    const auto& labels = dataset.labels_for(sample.nodule_id);
    f << sample.nodule_id << '\t' << sample.reader_id;
    for (int a = 0; a < kNumAttributes; ++a)
      f << '\t' << labels.attributes[static_cast<std::size_t>(a)];
    f << '\t' << data::to_string(labels.malignancy);
    f << '\t' << proj(static_cast<Eigen::Index>(r), 0) << '\t'
      << proj(static_cast<Eigen::Index>(r), 1);
    for (Eigen::Index d = 0; d < features.cols(); ++d)
      f << '\t' << features(static_cast<Eigen::Index>(r), d);
    f << '\n';
  }

  nlohmann::json meta;
  meta["format_version"] = 1;
  meta["projection_method"] = "pca";
  meta["n_rows"] = test_idx.size();
  meta["feature_dim"] = features.cols();
  meta["feature_source"] = model::to_string(source);
  std::ofstream mf(tsv_path.parent_path() / "embeddings_meta.json");
  mf << meta.dump(2) << "\n";
}

}  // namespace nodex::eval
