#pragma once

#include <filesystem>

#include "nodex/eval/evaluate.hpp"
#include "nodex/probe/trainer.hpp"

namespace nodex::eval {

struct SweepOptions {
  std::vector<Scalar> fractions;       // subset of (0,1]
  std::vector<std::uint64_t> seeds;    // one mask + training run per seed
  probe::ProbeTrainConfig probe_config;
  EvaluateOptions eval;                // mode forced to "trained" per cell
  bool with_baseline = false;          // also train the end-to-end comparison
  probe::EndToEndConfig baseline;
};

struct SweepRow {
  Scalar fraction = 1.0;
  std::uint64_t seed = 0;
  std::string task;  // "malignancy" or an attribute name
  Scalar accuracy = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepRow> baseline_rows;
};

/// Per (fraction, seed): builds the nested annotation mask, trains stage 2 on
/// it, evaluates, and records one row per task. The optional baseline trains
/// the end-to-end model on the same masks into a separate table. Writes
/// sweep.csv (and sweep_baseline.csv) under run_dir when given.
SweepResult annotation_sweep(model::Encoder& encoder, const nn::ParamStore& encoder_store,
                             const data::Dataset& dataset, const data::DatasetSplit& split,
                             const SweepOptions& options,
                             const std::filesystem::path& run_dir = {});

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

}  // namespace nodex::eval
