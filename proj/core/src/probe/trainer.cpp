#include "nodex/probe/trainer.hpp"

#include <cmath>
#include <fstream>

#include "nodex/distill/schedule.hpp"
#include "nodex/model/checkpoint.hpp"
#include "nodex/model/features.hpp"
#include "nodex/nn/layers.hpp"
#include "nodex/nn/optim.hpp"

namespace nodex::probe {

namespace fs = std::filesystem;

namespace {

struct TrainSet {
  std::vector<std::size_t> sample_indices;  // into dataset.samples
  std::vector<std::array<int, kNumAttributes>> attribute_labels;
  std::vector<int> malignancy_labels;  // 0 benign, 1 malignant, -1 excluded
};

TrainSet collect_train_set(const data::Dataset& dataset, const data::DatasetSplit& split,
                           const data::AnnotationMask& mask, ExcludedPolicy policy) {
  for (const auto& id : mask.annotated_ids)
    NODEX_CHECK(split.train_nodule_ids.count(id),
                "train_stage2: annotated nodule " + id + " is outside the train split");

  TrainSet ts;
  bool any_defined = false;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& sample = dataset.samples[i];
    if (!mask.annotated_ids.count(sample.nodule_id)) continue;
    const data::NoduleLabels& labels = dataset.labels_for(sample.nodule_id);
    if (labels.malignancy == data::Malignancy::excluded && policy == ExcludedPolicy::drop)
      continue;
    ts.sample_indices.push_back(i);
    ts.attribute_labels.push_back(labels.attributes);
    int mal = labels.malignancy == data::Malignancy::excluded
                  ? -1
                  : (labels.malignancy == data::Malignancy::malignant ? 1 : 0);
    if (mal >= 0) any_defined = true;
    ts.malignancy_labels.push_back(mal);
  }
  NODEX_CHECK(!ts.sample_indices.empty(), "train_stage2: no annotated training samples");
  NODEX_CHECK(any_defined, "train_stage2: no annotated samples with malignancy labels");
  return ts;
}

std::vector<Matrix> gather_patches(const data::Dataset& dataset,
                                   const std::vector<std::size_t>& indices) {
  std::vector<Matrix> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(dataset.samples[i].patch);
  return out;
}

}  // namespace

std::string epoch_log_line(const EpochRecord& r) {
  std::string line = "{\"epoch\":" + std::to_string(r.epoch);
  char buf[64];
  std::snprintf(buf, sizeof(buf), ",\"loss\":%.17g", r.loss);
  line += buf;
  for (int i = 0; i < kNumAttributes; ++i) {
    std::snprintf(buf, sizeof(buf), ",\"%s\":%.17g", kAttributeNames[i],
                  r.attribute_terms[static_cast<std::size_t>(i)]);
    line += buf;
  }
  std::snprintf(buf, sizeof(buf), ",\"malignancy\":%.17g,\"lr\":%.17g}", r.malignancy_term, r.lr);
  line += buf;
  return line;
}

Stage2Result train_stage2(model::Encoder& encoder, const nn::ParamStore& encoder_store,
                          const data::Dataset& dataset, const data::DatasetSplit& split,
                          const data::AnnotationMask& mask, const ProbeTrainConfig& config,
                          std::uint64_t seed, const fs::path& run_dir) {
  NODEX_CHECK(!encoder_store.trainable(), "train_stage2: encoder must be frozen");
  NODEX_CHECK(config.epochs >= 1, "train_stage2: epochs must be positive");

  TrainSet ts = collect_train_set(dataset, split, mask, config.excluded_policy);
  const int patch_px = static_cast<int>(dataset.samples.front().patch.rows());

  Stage2Result result{ProbeParameters::create(encoder.feature_dim(config.source), config.source,
                                              seed),
                      {}};

  const Eigen::Index n = static_cast<Eigen::Index>(ts.sample_indices.size());
  const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, n);
  const long steps_per_epoch = (n + batch - 1) / batch;
  const long total_steps = steps_per_epoch * config.epochs;

  Scalar lr0 = config.lr_override > 0
                   ? config.lr_override
                   : (mask.fraction >= 1.0 ? config.lr_full : config.lr_partial);

  nn::SgdMomentum opt(result.probe.store.all(), config.sgd_momentum);

  std::vector<Matrix> base_patches = gather_patches(dataset, ts.sample_indices);
  Matrix cached_features;
  if (!config.augment) {
    Matrix rows(n, static_cast<Eigen::Index>(patch_px) * patch_px);
    for (Eigen::Index i = 0; i < n; ++i)
      rows.row(i) = model::patch_to_row(base_patches[static_cast<std::size_t>(i)]);
    cached_features =
        model::extract_features(encoder, encoder_store, rows, patch_px, patch_px, config.source);
  }

  std::ofstream log_file;
  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    log_file.open(run_dir / "probe_log.jsonl");
    NODEX_REQUIRE(log_file.good(), "train_stage2: cannot open log in " + run_dir.string());
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Matrix features;
    if (config.augment) {
      auto augmented = augment::augment_probe(
          base_patches, config.augmentation,
          derive_seed(seed, "probe-aug-epoch", static_cast<std::uint64_t>(epoch)));
      Matrix rows(n, static_cast<Eigen::Index>(patch_px) * patch_px);
      for (Eigen::Index i = 0; i < n; ++i)
        rows.row(i) = model::patch_to_row(augmented[static_cast<std::size_t>(i)]);
      features = model::extract_features(encoder, encoder_store, rows, patch_px, patch_px,
                                         config.source);
    }
    const Matrix& feats = config.augment ? features : cached_features;

    Rng shuffle_rng(derive_seed(seed, "probe-shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    EpochRecord rec;
    rec.epoch = epoch;
    Scalar lr = lr0;
    for (long b = 0; b < steps_per_epoch; ++b) {
      const Eigen::Index lo = b * batch;
      const Eigen::Index hi = std::min<Eigen::Index>(lo + batch, n);
      const Eigen::Index bn = hi - lo;
      Matrix f(bn, feats.cols());
      std::vector<std::array<int, kNumAttributes>> attr_labels(static_cast<std::size_t>(bn));
      std::vector<int> mal_labels(static_cast<std::size_t>(bn));
      for (Eigen::Index i = 0; i < bn; ++i) {
        std::size_t src = order[static_cast<std::size_t>(lo + i)];
        f.row(i) = feats.row(static_cast<Eigen::Index>(src));
        attr_labels[static_cast<std::size_t>(i)] = ts.attribute_labels[src];
        mal_labels[static_cast<std::size_t>(i)] = ts.malignancy_labels[src];
      }

      result.probe.store.zero_grads();
      Stage2Loss loss = probe_loss_backward(result.probe, f, attr_labels, mal_labels,
                                       config.joint_malignancy_grad, nullptr);
      NODEX_REQUIRE(std::isfinite(loss.total), "train_stage2: non-finite loss");

      lr = distill::cosine_interp(
          lr0, 0.0,
          total_steps <= 1 ? 1.0
                           : static_cast<Scalar>(step) / static_cast<Scalar>(total_steps - 1));
      opt.step(lr);
      ++step;

      rec.loss += loss.total;
      for (int i = 0; i < kNumAttributes; ++i)
        rec.attribute_terms[static_cast<std::size_t>(i)] +=
            loss.attribute_terms[static_cast<std::size_t>(i)];
      rec.malignancy_term += loss.malignancy_term;
    }
    Scalar inv = 1.0 / static_cast<Scalar>(steps_per_epoch);
    rec.loss *= inv;
    for (auto& t : rec.attribute_terms) t *= inv;
    rec.malignancy_term *= inv;
    rec.lr = lr;
    result.log.push_back(rec);
    if (log_file.is_open()) log_file << epoch_log_line(rec) << "\n";
  }

  if (!run_dir.empty()) result.probe.save(run_dir / "probe.bin");
  return result;
}

EndToEndResult train_end_to_end(const data::Dataset& dataset, const data::DatasetSplit& split,
                                const data::AnnotationMask& mask, const EndToEndConfig& config,
                                std::uint64_t seed, const fs::path& run_dir) {
  TrainSet ts = collect_train_set(dataset, split, mask, config.excluded_policy);
  const int patch_px = static_cast<int>(dataset.samples.front().patch.rows());

  nn::ParamStore enc_store(true);
  Rng init_rng(derive_seed(seed, "e2e-init"));
  auto encoder = model::make_encoder(config.encoder, enc_store, init_rng);
  if (!config.init_checkpoint.empty()) {
    model::Checkpoint ckpt = model::Checkpoint::load(config.init_checkpoint);
    ckpt.load_into("teacher", enc_store);
  }

  EndToEndResult result{config.encoder,
                        nn::ParamStore(false),
                        nullptr,
                        ProbeParameters::create(encoder->feature_dim(
                                                    model::FeatureSource::final_token),
                                                model::FeatureSource::final_token, seed),
                        {}};

  const Eigen::Index n = static_cast<Eigen::Index>(ts.sample_indices.size());
  const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, n);
  const long steps_per_epoch = (n + batch - 1) / batch;
  const long total_steps = steps_per_epoch * config.epochs;
  const long warmup = steps_per_epoch * config.warmup_epochs;

  std::vector<nn::Parameter*> all_params = enc_store.all();
  for (nn::Parameter* p : result.probe.store.all()) all_params.push_back(p);
  nn::AdamW opt(all_params);

  std::vector<Matrix> base_patches = gather_patches(dataset, ts.sample_indices);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::ofstream log_file;
  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    log_file.open(run_dir / "e2e_log.jsonl");
  }

  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<Matrix> patches =
        config.augment
            ? augment::augment_probe(base_patches, config.augmentation,
                                     derive_seed(seed, "e2e-aug", static_cast<std::uint64_t>(epoch)))
            : base_patches;
    Rng shuffle_rng(derive_seed(seed, "e2e-shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    EpochRecord rec;
    rec.epoch = epoch;
    Scalar lr = 0;
    for (long b = 0; b < steps_per_epoch; ++b) {
      const Eigen::Index lo = b * batch;
      const Eigen::Index hi = std::min<Eigen::Index>(lo + batch, n);
      const Eigen::Index bn = hi - lo;
      Matrix rows(bn, static_cast<Eigen::Index>(patch_px) * patch_px);
      std::vector<std::array<int, kNumAttributes>> attr_labels(static_cast<std::size_t>(bn));
      std::vector<int> mal_labels(static_cast<std::size_t>(bn));
      for (Eigen::Index i = 0; i < bn; ++i) {
        std::size_t src = order[static_cast<std::size_t>(lo + i)];
        rows.row(i) = model::patch_to_row(patches[src]);
        attr_labels[static_cast<std::size_t>(i)] = ts.attribute_labels[src];
        mal_labels[static_cast<std::size_t>(i)] = ts.malignancy_labels[src];
      }

      Matrix feats =
          encoder->forward(rows, patch_px, patch_px, model::FeatureSource::final_token);
      enc_store.zero_grads();
      result.probe.store.zero_grads();
      Matrix dfeat;
      Stage2Loss loss =
          probe_loss_backward(result.probe, feats, attr_labels, mal_labels, true, &dfeat);
      NODEX_REQUIRE(std::isfinite(loss.total), "train_end_to_end: non-finite loss");
      encoder->backward(dfeat);

      lr = warmup > 0 && step < warmup
               ? config.peak_lr * static_cast<Scalar>(step) / static_cast<Scalar>(warmup)
               : distill::cosine_interp(
                     config.peak_lr, 0.0,
                     total_steps - 1 <= warmup
                         ? 1.0
                         : static_cast<Scalar>(step - warmup) /
                               static_cast<Scalar>(total_steps - 1 - warmup));
      opt.step(lr, config.weight_decay);
      ++step;

      rec.loss += loss.total;
      for (int i = 0; i < kNumAttributes; ++i)
        rec.attribute_terms[static_cast<std::size_t>(i)] +=
            loss.attribute_terms[static_cast<std::size_t>(i)];
      rec.malignancy_term += loss.malignancy_term;
    }
    Scalar inv = 1.0 / static_cast<Scalar>(steps_per_epoch);
    rec.loss *= inv;
    for (auto& t : rec.attribute_terms) t *= inv;
    rec.malignancy_term *= inv;
    rec.lr = lr;
    result.log.push_back(rec);
    if (log_file.is_open()) log_file << epoch_log_line(rec) << "\n";
  }

  // Freeze the trained weights for evaluation.
  Rng dummy(1);
  result.encoder = model::make_encoder(config.encoder, result.encoder_store, dummy);
  result.encoder_store.copy_values_from(enc_store);
  if (!run_dir.empty()) result.probe.save(run_dir / "probe.bin");
  return result;
}

}  // namespace nodex::probe
