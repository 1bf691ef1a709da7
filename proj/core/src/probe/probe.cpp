#include "nodex/probe/probe.hpp"

#include <cmath>

#include "nodex/model/checkpoint.hpp"
#include "nodex/nn/layers.hpp"

namespace nodex::probe {

ProbeParameters ProbeParameters::create(Eigen::Index feature_dim, model::FeatureSource source,
                                        std::uint64_t seed) {
  ProbeParameters probe;
  probe.feature_dim = feature_dim;
  probe.source = source;
  Rng rng(derive_seed(seed, "probe-init"));
  for (int i = 0; i < kNumAttributes; ++i) {
    auto& w = probe.store.create(std::string("attr.") + kAttributeNames[i] + ".weight",
                                 feature_dim, kAttributeClassCounts[i]);
    nn::init_trunc_normal(w, rng, 0.01);
    probe.store.create(std::string("attr.") + kAttributeNames[i] + ".bias", 1,
                       kAttributeClassCounts[i]);
  }
  auto& wm = probe.store.create("cls.weight", probe.concat_dim(), 2);
  nn::init_trunc_normal(wm, rng, 0.01);
  probe.store.create("cls.bias", 1, 2);
  return probe;
}

const Matrix& ProbeParameters::attr_weight(int i) const {
  return store.get(std::string("attr.") + kAttributeNames[i] + ".weight").value;
}
const Matrix& ProbeParameters::attr_bias(int i) const {
  return store.get(std::string("attr.") + kAttributeNames[i] + ".bias").value;
}
const Matrix& ProbeParameters::cls_weight() const { return store.get("cls.weight").value; }
const Matrix& ProbeParameters::cls_bias() const { return store.get("cls.bias").value; }

void ProbeParameters::save(const std::filesystem::path& path) const {
  nlohmann::json meta;
  meta["stage"] = "stage2";
  meta["tool_version"] = kVersion;
  meta["feature_dim"] = feature_dim;
  meta["source"] = model::to_string(source);
  model::save_checkpoint(path, meta, {{"probe", &store}});
}

ProbeParameters ProbeParameters::load(const std::filesystem::path& path) {
  model::Checkpoint ckpt = model::Checkpoint::load(path);
  ProbeParameters probe = create(ckpt.meta().at("feature_dim").get<Eigen::Index>(),
                                 model::feature_source_from_string(
                                     ckpt.meta().at("source").get<std::string>()),
                                 /*seed=*/0);
  ckpt.load_into("probe", probe.store);
  return probe;
}

std::vector<Matrix> predict_attributes(const ProbeParameters& probe, const Matrix& features) {
  NODEX_CHECK(features.cols() == probe.feature_dim,
              "predict_attributes: feature dimension mismatch");
  std::vector<Matrix> logits;
  logits.reserve(kNumAttributes);
  for (int i = 0; i < kNumAttributes; ++i) {
    Matrix z = features * probe.attr_weight(i);
    z.rowwise() += probe.attr_bias(i).row(0);
    logits.push_back(std::move(z));
  }
  return logits;
}

Matrix predict_malignancy(const ProbeParameters& probe, const Matrix& features,
                          const std::vector<Matrix>& attribute_logits) {
  NODEX_CHECK(attribute_logits.size() == kNumAttributes,
              "predict_malignancy: expected 8 attribute logit blocks");
  Matrix concat(features.rows(), probe.concat_dim());
  concat.leftCols(probe.feature_dim) = features;
  Eigen::Index off = probe.feature_dim;
  for (int i = 0; i < kNumAttributes; ++i) {
    const Matrix& z = attribute_logits[static_cast<std::size_t>(i)];
    NODEX_CHECK(z.cols() == kAttributeClassCounts[i] && z.rows() == features.rows(),
                "predict_malignancy: attribute logit shape mismatch");
    concat.middleCols(off, z.cols()) = z;
    off += z.cols();
  }
  Matrix out = concat * probe.cls_weight();
  out.rowwise() += probe.cls_bias().row(0);
  return out;
}

namespace {
Scalar ce_row(const Matrix& probs, Eigen::Index row, int klass) {
  return -std::log(std::max(probs(row, klass), 1e-12));
}
}  // namespace

Stage2Loss loss_stage2(const std::vector<Matrix>& attribute_logits, const Matrix& mal_logits,
                       const std::vector<std::array<int, kNumAttributes>>& attribute_labels,
                       const std::vector<int>& malignancy_labels) {
  const Eigen::Index n = mal_logits.rows();
  NODEX_CHECK(static_cast<Eigen::Index>(attribute_labels.size()) == n &&
                  static_cast<Eigen::Index>(malignancy_labels.size()) == n,
              "loss_stage2: label count mismatch");

  Stage2Loss loss;
  for (int i = 0; i < kNumAttributes; ++i) {
    Matrix probs = nn::softmax_rows(attribute_logits[static_cast<std::size_t>(i)]);
    Scalar term = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      int label = attribute_labels[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
      NODEX_CHECK(label >= 1 && label <= kAttributeClassCounts[i],
                  std::string("loss_stage2: label out of range for ") + kAttributeNames[i]);
      term += ce_row(probs, r, label - 1);
    }
    loss.attribute_terms[static_cast<std::size_t>(i)] = term / static_cast<Scalar>(n);
    loss.total += loss.attribute_terms[static_cast<std::size_t>(i)];
  }

  Matrix mal_probs = nn::softmax_rows(mal_logits);
  Scalar term = 0;
  Eigen::Index defined = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    int label = malignancy_labels[static_cast<std::size_t>(r)];
    if (label < 0) continue;  // excluded: attribute terms only
    NODEX_CHECK(label <= 1, "loss_stage2: malignancy label out of range");
    term += ce_row(mal_probs, r, label);
    ++defined;
  }
  loss.malignancy_term = defined > 0 ? term / static_cast<Scalar>(defined) : 0.0;
  loss.total += loss.malignancy_term;
  return loss;
}

std::vector<std::array<int, kNumAttributes>> attribute_predictions(
    const std::vector<Matrix>& attribute_logits) {
  const Eigen::Index n = attribute_logits.front().rows();
  std::vector<std::array<int, kNumAttributes>> out(static_cast<std::size_t>(n));
  for (int i = 0; i < kNumAttributes; ++i) {
    const Matrix& z = attribute_logits[static_cast<std::size_t>(i)];
    for (Eigen::Index r = 0; r < n; ++r) {
      Eigen::Index best = 0;
      z.row(r).maxCoeff(&best);
      out[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
    }
  }
  return out;
}

std::vector<int> malignancy_predictions(const Matrix& mal_logits) {
  std::vector<int> out(static_cast<std::size_t>(mal_logits.rows()));
  for (Eigen::Index r = 0; r < mal_logits.rows(); ++r)
    out[static_cast<std::size_t>(r)] = mal_logits(r, 1) > mal_logits(r, 0) ? 1 : 0;
  return out;
}

Stage2Loss probe_loss_backward(ProbeParameters& probe, const Matrix& features,
                               const std::vector<std::array<int, kNumAttributes>>& attr_labels,
                               const std::vector<int>& mal_labels, bool joint_grad,
                               Matrix* dfeatures) {
  const Eigen::Index n = features.rows();
  std::vector<Matrix> attr_logits = predict_attributes(probe, features);
  Matrix mal_logits = predict_malignancy(probe, features, attr_logits);
  Stage2Loss loss = loss_stage2(attr_logits, mal_logits, attr_labels, mal_labels);

  // Malignancy head gradient: batch mean over rows with defined labels.
  Eigen::Index defined = 0;
  for (int label : mal_labels)
    if (label >= 0) ++defined;
  Matrix dz_mal = Matrix::Zero(n, 2);
  if (defined > 0) {
    Matrix p = nn::softmax_rows(mal_logits);
    for (Eigen::Index r = 0; r < n; ++r) {
      int label = mal_labels[static_cast<std::size_t>(r)];
      if (label < 0) continue;
      dz_mal.row(r) = p.row(r);
      dz_mal(r, label) -= 1.0;
      dz_mal.row(r) /= static_cast<Scalar>(defined);
    }
  }

  Matrix concat(n, probe.concat_dim());
  concat.leftCols(probe.feature_dim) = features;
  Eigen::Index off = probe.feature_dim;
  for (int i = 0; i < kNumAttributes; ++i) {
    concat.middleCols(off, kAttributeClassCounts[i]) = attr_logits[static_cast<std::size_t>(i)];
    off += kAttributeClassCounts[i];
  }
  probe.store.get("cls.weight").accumulate(concat.transpose() * dz_mal);
  probe.store.get("cls.bias").accumulate(dz_mal.colwise().sum());
  Matrix dconcat = dz_mal * probe.cls_weight().transpose();

  if (dfeatures) *dfeatures = dconcat.leftCols(probe.feature_dim);

  off = probe.feature_dim;
  for (int i = 0; i < kNumAttributes; ++i) {
    Matrix p = nn::softmax_rows(attr_logits[static_cast<std::size_t>(i)]);
    for (Eigen::Index r = 0; r < n; ++r)
      p(r, attr_labels[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] - 1) -= 1.0;
    Matrix dz = p / static_cast<Scalar>(n);
    if (joint_grad) dz += dconcat.middleCols(off, kAttributeClassCounts[i]);
    const std::string name = std::string("attr.") + kAttributeNames[i];
    probe.store.get(name + ".weight").accumulate(features.transpose() * dz);
    probe.store.get(name + ".bias").accumulate(dz.colwise().sum());
    if (dfeatures) *dfeatures += dz * probe.attr_weight(i).transpose();
    off += kAttributeClassCounts[i];
  }
  return loss;
}

}  // namespace nodex::probe
