#include "nodex/model/features.hpp"

namespace nodex::model {

Matrix patch_to_row(const Matrix& patch) {
  Matrix row(1, patch.rows() * patch.cols());
  for (Eigen::Index r = 0; r < patch.rows(); ++r)
    for (Eigen::Index c = 0; c < patch.cols(); ++c) row(0, r * patch.cols() + c) = patch(r, c);
  return row;
}

Matrix patches_to_rows(const std::vector<data::Sample>& samples,
                       const std::vector<std::size_t>& indices) {
  NODEX_CHECK(!indices.empty(), "patches_to_rows: empty selection");
  const Matrix& first = samples[indices[0]].patch;
  Matrix rows(static_cast<Eigen::Index>(indices.size()), first.rows() * first.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Matrix& p = samples[indices[i]].patch;
    NODEX_CHECK(p.rows() == first.rows() && p.cols() == first.cols(),
                "patches_to_rows: mixed patch shapes");
    rows.row(static_cast<Eigen::Index>(i)) = patch_to_row(p);
  }
  return rows;
}

Matrix extract_features(Encoder& encoder, const nn::ParamStore& store, const Matrix& patch_rows,
                        int height, int width, FeatureSource source, int batch_size) {
  NODEX_CHECK(!store.trainable(),
              "extract_features: encoder must be frozen (non-trainable store)");
  Eigen::Index n = patch_rows.rows();
  Matrix out(n, encoder.feature_dim(source));
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    Eigen::Index len = std::min<Eigen::Index>(batch_size, n - start);
    out.middleRows(start, len) =
        encoder.forward(patch_rows.middleRows(start, len), height, width, source);
  }
  return out;
}

}  // namespace nodex::model
