#include "nodex/eval/knn.hpp"

#include <algorithm>
#include <numeric>

namespace nodex::eval {

KnnIndex build_knn_index(const Matrix& train_features, const std::vector<std::string>& ids,
                         bool l2_normalize) {
  NODEX_CHECK(train_features.rows() > 0, "knn: empty index");
  NODEX_CHECK(ids.empty() || ids.size() == static_cast<std::size_t>(train_features.rows()),
              "knn: id count mismatch");
  KnnIndex index;
  index.features = train_features;
  index.ids = ids;
  index.normalized = l2_normalize;
  if (l2_normalize)
    for (Eigen::Index r = 0; r < index.features.rows(); ++r) {
      Scalar n = index.features.row(r).norm();
      if (n > 0) index.features.row(r) /= n;
    }
  return index;
}

std::vector<int> knn_classify(const KnnIndex& index, const std::vector<int>& train_labels,
                              int n_classes, const Matrix& queries, int k, bool weighted,
                              const std::vector<std::string>* exclude_ids) {
  const Eigen::Index nt = index.features.rows();
  NODEX_CHECK(nt > 0, "knn_classify: empty index");
  NODEX_CHECK(train_labels.size() == static_cast<std::size_t>(nt),
              "knn_classify: label count mismatch");
  NODEX_CHECK(k >= 1 && k <= nt, "knn_classify: k must be in [1, index size]");
  NODEX_CHECK(queries.cols() == index.features.cols(), "knn_classify: dimension mismatch");
  for (int label : train_labels)
    NODEX_CHECK(label >= 0 && label < n_classes, "knn_classify: label out of range");

  std::vector<int> out(static_cast<std::size_t>(queries.rows()));
  std::vector<Eigen::Index> rank(static_cast<std::size_t>(nt));

  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    Vector query = queries.row(q).transpose();
    if (index.normalized) {
      Scalar n = query.norm();
      if (n > 0) query /= n;
    }
    Vector sims = index.features * query;

    std::iota(rank.begin(), rank.end(), Eigen::Index(0));
    const std::string* excluded =
        exclude_ids ? &(*exclude_ids)[static_cast<std::size_t>(q)] : nullptr;
    auto usable_end = rank.end();
    if (excluded && !index.ids.empty())
      usable_end = std::partition(rank.begin(), rank.end(), [&](Eigen::Index r) {
        return index.ids[static_cast<std::size_t>(r)] != *excluded;
      });
    const auto usable = static_cast<Eigen::Index>(usable_end - rank.begin());
    NODEX_CHECK(usable >= k, "knn_classify: exclusion leaves fewer than k rows");
    // Deterministic order: similarity descending, then row index.
    std::partial_sort(rank.begin(), rank.begin() + k, usable_end,
                      [&sims](Eigen::Index a, Eigen::Index b) {
                        if (sims(a) != sims(b)) return sims(a) > sims(b);
                        return a < b;
                      });

    std::vector<Scalar> votes(static_cast<std::size_t>(n_classes), 0.0);
    for (Eigen::Index i = 0; i < k; ++i) {
      Eigen::Index r = rank[static_cast<std::size_t>(i)];
      Scalar w = weighted ? std::max(sims(r), 0.0) : 1.0;
      votes[static_cast<std::size_t>(train_labels[static_cast<std::size_t>(r)])] += w;
    }
    int best = 0;
    for (int c = 1; c < n_classes; ++c)
      if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
    out[static_cast<std::size_t>(q)] = best;
  }
  return out;
}

}  // namespace nodex::eval
