#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "nodex/data/preprocess.hpp"
#include "nodex/probe/trainer.hpp"
#include "toy_configs.hpp"

using namespace nodex;
using namespace nodex::probe;
namespace fs = std::filesystem;

namespace {

Matrix random_features(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, d);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("predict_attributes: logit lengths follow class counts") {
  auto p = ProbeParameters::create(384, model::FeatureSource::final_token, 1);
  Matrix f = random_features(3, 384, 2);
  auto logits = predict_attributes(p, f);
  REQUIRE(logits.size() == kNumAttributes);
  CHECK(logits[0].cols() == 5);  // subtlety
  CHECK(logits[1].cols() == 4);  // internalStructure
  CHECK(logits[2].cols() == 6);  // calcification
  for (const auto& z : logits) CHECK(z.rows() == 3);

  Matrix wrong = random_features(3, 100, 2);
  CHECK_THROWS_AS(predict_attributes(p, wrong), InvalidInput);
}

TEST_CASE("predict_attributes: zero heads give uniform softmax") {
  auto p = ProbeParameters::create(8, model::FeatureSource::final_token, 1);
  for (nn::Parameter* param : p.store.all()) param->value.setZero();
  Matrix f = random_features(2, 8, 3);
  auto logits = predict_attributes(p, f);
  for (const auto& z : logits) CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predict_malignancy: concat layout is feature then canonical attribute order") {
  // D=384 and LIDC class counts: concat length 384 + 40 = 424.
  auto p = ProbeParameters::create(384, model::FeatureSource::final_token, 1);
  CHECK(p.concat_dim() == 424);
  CHECK(p.cls_weight().rows() == 424);

  // A head reading only the calcification block with negative weight on the
  // last ("absent") class: benign logit falls as that logit rises.
  auto toy = ProbeParameters::create(4, model::FeatureSource::final_token, 2);
  for (nn::Parameter* param : toy.store.all()) param->value.setZero();
  // calcification block starts after features(4) + subtlety(5) + internalStructure(4).
  Eigen::Index calc_off = 4 + 5 + 4;
  nn::Parameter& w = toy.store.get("cls.weight");
  w.value(calc_off + 5, 0) = -1.0;  // benign logit -= solid/absent calcification logit

  Matrix f = Matrix::Zero(1, 4);
  std::vector<Matrix> logits = predict_attributes(toy, f);
  logits[2](0, 5) = 2.0;  // push the calcification logit up by hand
  Matrix mal1 = predict_malignancy(toy, f, logits);
  logits[2](0, 5) = 5.0;
  Matrix mal2 = predict_malignancy(toy, f, logits);
  CHECK(mal2(0, 0) < mal1(0, 0));

  // Negative test of the order contract: swapping two same-shaped attribute
  // blocks without permuting head weights changes the output.
  nn::Parameter& w2 = toy.store.get("cls.weight");
  w2.value(4 + 2, 0) = 3.0;  // a weight inside the subtlety block
  auto distinct = predict_attributes(toy, f);
  distinct[0].setConstant(1.0);   // subtlety block
  distinct[3].setConstant(-1.0);  // sphericity block, also 5 classes
  Matrix a = predict_malignancy(toy, f, distinct);
  std::swap(distinct[0], distinct[3]);
  Matrix b = predict_malignancy(toy, f, distinct);
  CHECK(std::abs(a(0, 0) - b(0, 0)) > 1e-9);
}

TEST_CASE("loss_stage2: closed-form values and the scalar oracle") {
  auto p = ProbeParameters::create(4, model::FeatureSource::final_token, 3);

  // Perfect one-hot predictions -> total 0.
  std::vector<Matrix> logits;
  for (int i = 0; i < kNumAttributes; ++i) {
    Matrix z = Matrix::Zero(2, kAttributeClassCounts[i]);
    z(0, 0) = 60.0;  // label 1
    z(1, 1) = 60.0;  // label 2
    logits.push_back(z);
  }
  Matrix mal = Matrix::Zero(2, 2);
  mal(0, 0) = 60.0;
  mal(1, 1) = 60.0;
  std::vector<std::array<int, kNumAttributes>> labels(2);
  labels[0].fill(1);
  labels[1].fill(2);
  auto perfect = loss_stage2(logits, mal, labels, {0, 1});
  CHECK(perfect.total == doctest::Approx(0.0).epsilon(1e-9));

  // Uniform predictions: each 5-class attribute term is log 5.
  std::vector<Matrix> uniform_logits;
  for (int i = 0; i < kNumAttributes; ++i)
    uniform_logits.push_back(Matrix::Zero(2, kAttributeClassCounts[i]));
  auto uniform = loss_stage2(uniform_logits, Matrix::Zero(2, 2), labels, {0, 1});
  CHECK(uniform.attribute_terms[0] == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(uniform.attribute_terms[1] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(uniform.malignancy_term == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Total equals the sum of the 9 terms exactly.
  Scalar sum = uniform.malignancy_term;
  for (Scalar t : uniform.attribute_terms) sum += t;
  CHECK(uniform.total == doctest::Approx(sum).epsilon(1e-15));

  // Random 2-sample batch vs a hand-rolled scalar cross-entropy oracle.
  Rng rng(4);
  std::vector<Matrix> rnd;
  for (int i = 0; i < kNumAttributes; ++i)
    rnd.push_back(random_features(2, kAttributeClassCounts[i], 10 + static_cast<std::uint64_t>(i)));
  Matrix rnd_mal = random_features(2, 2, 20);
  auto res = loss_stage2(rnd, rnd_mal, labels, {1, -1});
  auto ce_oracle = [](const Matrix& z, Eigen::Index row, int cls) {
    Scalar mx = z.row(row).maxCoeff();
    Scalar denom = 0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) denom += std::exp(z(row, c) - mx);
    return -(z(row, cls) - mx - std::log(denom));
  };
  for (int i = 0; i < kNumAttributes; ++i) {
    Scalar expect = 0.5 * (ce_oracle(rnd[static_cast<std::size_t>(i)], 0, 0) +
                           ce_oracle(rnd[static_cast<std::size_t>(i)], 1, 1));
    CHECK(res.attribute_terms[static_cast<std::size_t>(i)] ==
          doctest::Approx(expect).epsilon(1e-9));
  }
  // Row 1 excluded: malignancy term averages over row 0 only.
  CHECK(res.malignancy_term == doctest::Approx(ce_oracle(rnd_mal, 0, 1)).epsilon(1e-9));

  // Out-of-range labels raise.
  labels[0][0] = 6;
  CHECK_THROWS_AS(loss_stage2(rnd, rnd_mal, labels, {0, 1}), InvalidInput);
}

TEST_CASE("probe: argmax is invariant to jointly scaling features and weights") {
  auto p = ProbeParameters::create(6, model::FeatureSource::final_token, 5);
  Matrix f = random_features(4, 6, 6);
  auto before = attribute_predictions(predict_attributes(p, f));

  // Scale features by c and divide every weight by c: logits identical.
  Scalar c = 3.7;
  for (nn::Parameter* param : p.store.all())
    if (param->name.find(".weight") != std::string::npos) param->value /= c;
  auto after = attribute_predictions(predict_attributes(p, f * c));
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("probe: serialized parameters reproduce predictions bit-exactly") {
  fs::path dir = fs::temp_directory_path() / "nodex_test_probe";
  fs::create_directories(dir);
  auto p = ProbeParameters::create(16, model::FeatureSource::concat_last_4, 7);
  Matrix f = random_features(5, 16, 8);
  auto logits = predict_attributes(p, f);
  Matrix mal = predict_malignancy(p, f, logits);

  p.save(dir / "probe.bin");
  auto q = ProbeParameters::load(dir / "probe.bin");
  CHECK(q.source == model::FeatureSource::concat_last_4);
  auto logits2 = predict_attributes(q, f);
  Matrix mal2 = predict_malignancy(q, f, logits2);
  for (std::size_t i = 0; i < logits.size(); ++i)
    CHECK((logits[i] - logits2[i]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((mal - mal2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("train_stage2: frozen encoder untouched, loss decreases on one sample") {
  auto ds = data::generate_synthetic_dataset(30, 9, 1);
  auto split = data::split_nodules(ds, 3);

  // Frozen random encoder is enough here.
  nn::ParamStore store(false);
  Rng rng(10);
  model::EncoderConfig ecfg;
  ecfg.kind = "vit";
  ecfg.depth = 4;
  ecfg.n_heads = 2;
  ecfg.embed_dim = 16;
  ecfg.mlp_ratio = 2;
  auto enc = model::make_encoder(ecfg, store, rng);

  std::vector<Matrix> before;
  for (const nn::Parameter* p : store.all()) before.push_back(p->value);

  ProbeTrainConfig cfg;
  cfg.epochs = 30;
  cfg.augment = false;
  cfg.source = model::FeatureSource::final_token;

  SUBCASE("single-sample mask trends down") {
    // Pick one train nodule with a defined malignancy label.
    data::AnnotationMask mask;
    mask.fraction = 0.01;
    mask.seed = 1;
    for (const auto& id : split.train_nodule_ids)
      if (ds.labels_for(id).malignancy != data::Malignancy::excluded) {
        mask.annotated_ids = {id};
        break;
      }
    auto result = train_stage2(*enc, store, ds, split, mask, cfg, 5);
    REQUIRE(result.log.size() == 30);
    CHECK(result.log.back().loss < result.log.front().loss);
  }

  SUBCASE("mask covering everything trains and leaves the encoder bit-identical") {
    auto mask = data::mask_annotations(split, 1.0, 2);
    auto result = train_stage2(*enc, store, ds, split, mask, cfg, 5);
    auto after = store.all();
    for (std::size_t i = 0; i < before.size(); ++i)
      CHECK((after[i]->value - before[i]).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("no defined malignancy labels raises") {
    data::AnnotationMask mask;
    mask.fraction = 0.5;
    mask.seed = 1;
    for (const auto& id : split.train_nodule_ids)
      if (ds.labels_for(id).malignancy == data::Malignancy::excluded)
        mask.annotated_ids.insert(id);
    if (!mask.annotated_ids.empty())
      CHECK_THROWS_AS(train_stage2(*enc, store, ds, split, mask, cfg, 5), InvalidInput);
  }
}

TEST_CASE("train_end_to_end: runs and returns an evaluable frozen model") {
  auto ds = data::generate_synthetic_dataset(20, 12, 1);
  auto split = data::split_nodules(ds, 4);
  auto mask = data::mask_annotations(split, 1.0, 1);

  EndToEndConfig cfg;
  cfg.encoder.kind = "vit";
  cfg.encoder.depth = 4;
  cfg.encoder.n_heads = 2;
  cfg.encoder.embed_dim = 16;
  cfg.encoder.mlp_ratio = 2;
  cfg.epochs = 2;
  cfg.augment = false;

  auto result = train_end_to_end(ds, split, mask, cfg, 6);
  CHECK(result.log.size() == 2);
  CHECK_FALSE(result.encoder_store.trainable());
  CHECK(result.probe.source == model::FeatureSource::final_token);
  // The frozen copy produces finite features.
  Matrix rows = model::patches_to_rows(ds.samples, {0, 1});
  Matrix f = model::extract_features(*result.encoder, result.encoder_store, rows, 32, 32,
                                     model::FeatureSource::final_token);
  CHECK(f.allFinite());
}
