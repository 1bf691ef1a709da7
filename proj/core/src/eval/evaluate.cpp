#include "nodex/eval/evaluate.hpp"

#include <algorithm>

#include "nodex/data/preprocess.hpp"
#include "nodex/eval/knn.hpp"

namespace nodex::eval {

namespace {

struct SplitFeatures {
  std::vector<std::size_t> test_idx;
  std::vector<std::size_t> train_idx;
  Matrix test_features;
  Matrix train_features;  // knn mode only
};

Matrix features_of(model::Encoder& encoder, const nn::ParamStore& store,
                   const data::Dataset& dataset, const std::vector<std::size_t>& indices,
                   model::FeatureSource source) {
  Matrix rows = model::patches_to_rows(dataset.samples, indices);
  int px = static_cast<int>(dataset.samples[indices[0]].patch.rows());
  return model::extract_features(encoder, store, rows, px, px, source);
}

}  // namespace

MetricsReport evaluate(model::Encoder& encoder, const nn::ParamStore& encoder_store,
                       const probe::ProbeParameters* probes, const data::Dataset& dataset,
                       const data::DatasetSplit& split, const EvaluateOptions& options) {
  NODEX_CHECK(options.mode == "knn" || options.mode == "trained",
              "evaluate: mode must be knn or trained");
  NODEX_CHECK(options.mode != "trained" || probes != nullptr,
              "evaluate: trained mode requires probe parameters");
  NODEX_CHECK(options.mode != "knn" || options.k >= 1, "evaluate: knn mode requires k");
  for (const auto& id : split.train_nodule_ids)
    NODEX_CHECK(!split.test_nodule_ids.count(id),
                "evaluate: split leakage, nodule " + id + " is in both partitions");

  SplitFeatures sf;
  sf.test_idx = dataset.sample_indices(split.test_nodule_ids);
  NODEX_CHECK(!sf.test_idx.empty(), "evaluate: no test images");

  const model::FeatureSource source =
      options.mode == "knn" ? options.knn_source : probes->source;
  sf.test_features = features_of(encoder, encoder_store, dataset, sf.test_idx, source);

  const Eigen::Index n_test = static_cast<Eigen::Index>(sf.test_idx.size());
  std::vector<std::array<int, kNumAttributes>> attr_pred(static_cast<std::size_t>(n_test));
  std::vector<int> mal_pred_all(static_cast<std::size_t>(n_test), -1);

  if (options.mode == "trained") {
    NODEX_CHECK(probes->feature_dim == sf.test_features.cols(),
                "evaluate: probe feature dimension mismatch");
    auto logits = probe::predict_attributes(*probes, sf.test_features);
    attr_pred = probe::attribute_predictions(logits);
    Matrix mal_logits = probe::predict_malignancy(*probes, sf.test_features, logits);
    mal_pred_all = probe::malignancy_predictions(mal_logits);
  } else {
    sf.train_idx = dataset.sample_indices(split.train_nodule_ids);
    NODEX_CHECK(!sf.train_idx.empty(), "evaluate: empty train index for knn");
    sf.train_features = features_of(encoder, encoder_store, dataset, sf.train_idx, source);

    KnnIndex index = build_knn_index(sf.train_features, {});
    for (int a = 0; a < kNumAttributes; ++a) {
      std::vector<int> train_labels;
      train_labels.reserve(sf.train_idx.size());
      for (std::size_t i : sf.train_idx)
        train_labels.push_back(
            dataset.labels_for(dataset.samples[i].nodule_id).attributes[static_cast<std::size_t>(a)] -
            1);
      auto pred = knn_classify(index, train_labels, kAttributeClassCounts[a], sf.test_features,
                               options.k, options.weighted_knn);
      for (Eigen::Index r = 0; r < n_test; ++r)
        attr_pred[static_cast<std::size_t>(r)][static_cast<std::size_t>(a)] =
            pred[static_cast<std::size_t>(r)] + 1;
    }

    // Malignancy index over train images with defined labels only.
    std::vector<Eigen::Index> defined_rows;
    std::vector<int> mal_labels;
    for (std::size_t i = 0; i < sf.train_idx.size(); ++i) {
      const auto& l = dataset.labels_for(dataset.samples[sf.train_idx[i]].nodule_id);
      if (l.malignancy == data::Malignancy::excluded) continue;
      defined_rows.push_back(static_cast<Eigen::Index>(i));
      mal_labels.push_back(l.malignancy == data::Malignancy::malignant ? 1 : 0);
    }
    NODEX_CHECK(static_cast<int>(defined_rows.size()) >= options.k,
                "evaluate: fewer malignancy-labelled train images than k");
    Matrix mal_features(static_cast<Eigen::Index>(defined_rows.size()), sf.train_features.cols());
    for (std::size_t i = 0; i < defined_rows.size(); ++i)
      mal_features.row(static_cast<Eigen::Index>(i)) = sf.train_features.row(defined_rows[i]);
    KnnIndex mal_index = build_knn_index(mal_features, {});
    auto pred =
        knn_classify(mal_index, mal_labels, 2, sf.test_features, options.k, options.weighted_knn);
    for (Eigen::Index r = 0; r < n_test; ++r)
      mal_pred_all[static_cast<std::size_t>(r)] = pred[static_cast<std::size_t>(r)];
  }

  // Per-image metrics.
  MetricsReport report;
  report.mode = options.mode;
  report.k = options.mode == "knn" ? options.k : 0;
  report.annotation_fraction = options.annotation_fraction;
  report.config_fingerprint = options.config_fingerprint;
  report.n_test_images = sf.test_idx.size();

  for (int a = 0; a < kNumAttributes; ++a) {
    std::vector<int> pred, truth;
    pred.reserve(sf.test_idx.size());
    truth.reserve(sf.test_idx.size());
    for (std::size_t r = 0; r < sf.test_idx.size(); ++r) {
      pred.push_back(attr_pred[r][static_cast<std::size_t>(a)]);
      truth.push_back(dataset.labels_for(dataset.samples[sf.test_idx[r]].nodule_id)
                          .attributes[static_cast<std::size_t>(a)]);
    }
    report.attribute_accuracy[static_cast<std::size_t>(a)] = within_one_accuracy(pred, truth);
    report.attribute_reported[static_cast<std::size_t>(a)] =
        std::string(kAttributeNames[a]) != "internalStructure";
  }

  std::vector<int> mal_pred, mal_truth;
  for (std::size_t r = 0; r < sf.test_idx.size(); ++r) {
    const auto& l = dataset.labels_for(dataset.samples[sf.test_idx[r]].nodule_id);
    if (l.malignancy == data::Malignancy::excluded) continue;
    mal_pred.push_back(mal_pred_all[r]);
    mal_truth.push_back(l.malignancy == data::Malignancy::malignant ? 1 : 0);
  }
  NODEX_CHECK(!mal_truth.empty(), "evaluate: no test images with defined malignancy");
  report.malignancy_accuracy = exact_accuracy(mal_pred, mal_truth);

  std::array<Scalar, kNumAttributes> fractions{};
  for (int a = 0; a < kNumAttributes; ++a)
    fractions[static_cast<std::size_t>(a)] =
        report.attribute_accuracy[static_cast<std::size_t>(a)] / 100.0;
  report.count_distribution = attribute_count_distribution(fractions);

  // Per-nodule aggregation (secondary statistic): ordinal medians of the
  // per-image predictions, malignancy by majority with ties benign.
  std::map<std::string, std::vector<std::size_t>> by_nodule;
  for (std::size_t r = 0; r < sf.test_idx.size(); ++r)
    by_nodule[dataset.samples[sf.test_idx[r]].nodule_id].push_back(r);
  report.n_test_nodules = by_nodule.size();

  for (int a = 0; a < kNumAttributes; ++a) {
    std::vector<int> pred, truth;
    for (const auto& [nodule_id, rows] : by_nodule) {
      std::vector<int> votes;
      votes.reserve(rows.size());
      for (std::size_t r : rows) votes.push_back(attr_pred[r][static_cast<std::size_t>(a)]);
      pred.push_back(data::median_ordinal(votes));
      truth.push_back(dataset.labels_for(nodule_id).attributes[static_cast<std::size_t>(a)]);
    }
    report.per_nodule_attribute_accuracy[static_cast<std::size_t>(a)] =
        within_one_accuracy(pred, truth);
  }
  {
    std::vector<int> pred, truth;
    for (const auto& [nodule_id, rows] : by_nodule) {
      const auto& l = dataset.labels_for(nodule_id);
      if (l.malignancy == data::Malignancy::excluded) continue;
      int malignant_votes = 0;
      for (std::size_t r : rows) malignant_votes += mal_pred_all[r] == 1 ? 1 : 0;
      pred.push_back(2 * malignant_votes > static_cast<int>(rows.size()) ? 1 : 0);
      truth.push_back(l.malignancy == data::Malignancy::malignant ? 1 : 0);
    }
    report.per_nodule_malignancy_accuracy = exact_accuracy(pred, truth);
  }
  return report;
}

}  // namespace nodex::eval
