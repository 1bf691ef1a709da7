#pragma once

#include <string>
#include <vector>

#include "nodex/common.hpp"

namespace nodex::eval {

/// Embedding index for dot-product k-NN. Rows are train images; features are
/// l2-normalised on construction by default.
struct KnnIndex {
  Matrix features;               // [Nt, D]
  std::vector<std::string> ids;  // nodule id per row (self-exclusion by id)
  bool normalized = true;
};

KnnIndex build_knn_index(const Matrix& train_features, const std::vector<std::string>& ids,
                         bool l2_normalize = true);

/// For each query row: rank index rows by dot product, take the top k and
/// vote over `train_labels` (0-based classes). Weighted votes use the
/// similarity floored at 0; ties resolve to the smaller class index. Rows
/// whose id equals the query's entry in `exclude_ids` are skipped.
std::vector<int> knn_classify(const KnnIndex& index, const std::vector<int>& train_labels,
                              int n_classes, const Matrix& queries, int k, bool weighted = true,
                              const std::vector<std::string>* exclude_ids = nullptr);

}  // namespace nodex::eval
