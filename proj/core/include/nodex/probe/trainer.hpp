#pragma once

#include <filesystem>

#include "nodex/augment/augment.hpp"
#include "nodex/probe/probe.hpp"

namespace nodex::probe {

enum class ExcludedPolicy { drop, attributes_only };

struct ProbeTrainConfig {
  int epochs = 100;
  int batch_size = 128;
  Scalar sgd_momentum = 0.9;
  Scalar lr_full = 0.0005;     // initial lr with the full annotation set
  Scalar lr_partial = 0.00025; // initial lr with a partial annotation set
  Scalar lr_override = 0.0;    // > 0 forces this initial lr
  bool augment = true;
  augment::ProbeAugmentConfig augmentation;
  model::FeatureSource source = model::FeatureSource::concat_last_4;
  bool joint_malignancy_grad = true;  // backprop malignancy loss into attribute heads
  ExcludedPolicy excluded_policy = ExcludedPolicy::drop;
};

struct EpochRecord {
  int epoch = 0;
  Scalar loss = 0;
  std::array<Scalar, kNumAttributes> attribute_terms{};
  Scalar malignancy_term = 0;
  Scalar lr = 0;
};

struct Stage2Result {
  ProbeParameters probe;
  std::vector<EpochRecord> log;
};

std::string epoch_log_line(const EpochRecord& r);

/// Trains the linear probes on frozen features of the annotated training
/// samples. The encoder store must be frozen; samples of nodules with
/// excluded malignancy follow the configured policy. Throws when no
/// annotated sample carries a defined malignancy label. Writes
/// probe_log.jsonl and probe.bin under run_dir when given.
Stage2Result train_stage2(model::Encoder& encoder, const nn::ParamStore& encoder_store,
                          const data::Dataset& dataset, const data::DatasetSplit& split,
                          const data::AnnotationMask& mask, const ProbeTrainConfig& config,
                          std::uint64_t seed, const std::filesystem::path& run_dir = {});

/// Supervised end-to-end baseline: a fresh encoder plus the same head
/// structure trained jointly on the annotated subset (the comparison row for
/// annotation-reduction sweeps).
struct EndToEndConfig {
  model::EncoderConfig encoder;
  int epochs = 40;
  int batch_size = 128;
  Scalar peak_lr = 3e-4;
  int warmup_epochs = 2;
  Scalar weight_decay = 0.01;
  bool augment = true;
  augment::ProbeAugmentConfig augmentation;
  ExcludedPolicy excluded_policy = ExcludedPolicy::drop;
  std::string init_checkpoint;
};

struct EndToEndResult {
  model::EncoderConfig encoder_config;
  nn::ParamStore encoder_store{false};  // frozen copy of the trained weights
  std::unique_ptr<model::Encoder> encoder;
  ProbeParameters probe;
  std::vector<EpochRecord> log;
};

EndToEndResult train_end_to_end(const data::Dataset& dataset, const data::DatasetSplit& split,
                                const data::AnnotationMask& mask, const EndToEndConfig& config,
                                std::uint64_t seed, const std::filesystem::path& run_dir = {});

}  // namespace nodex::probe
