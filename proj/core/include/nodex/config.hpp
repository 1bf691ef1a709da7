#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "nodex/distill/trainer.hpp"
#include "nodex/eval/evaluate.hpp"
#include "nodex/probe/trainer.hpp"

namespace nodex {

/// Raised for malformed or unknown configuration input; the CLI maps it to
/// exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Flat INI-style experiment configuration: `[section]` headers, `key =
/// value` lines, `#` comments. Keys are addressed as "section.key"; unknown
/// keys are rejected. Every run writes its resolved form next to its
/// artifacts and is identified by a content hash of that form.
struct ExperimentConfig {
  // [data]
  std::string data_dir;
  std::string raw_dir;
  std::uint64_t split_seed = 42;
  bool stratified_split = false;
  Scalar window_lo = -1000.0;
  Scalar window_hi = 400.0;
  int synth_nodules = 200;
  int synth_readers = 3;
  std::uint64_t synth_seed = 7;

  distill::Stage1Config stage1;  // [views] [encoder] [head] [stage1]

  // [stage2]
  probe::ProbeTrainConfig stage2;
  Scalar stage2_fraction = 1.0;
  std::uint64_t stage2_mask_seed = 0;
  std::uint64_t stage2_seed = 0;
  std::string stage2_checkpoint;  // stage-1 checkpoint override
  std::string stage2_strategy = "two_stage";  // or "end_to_end"

  // [e2e]
  probe::EndToEndConfig e2e;

  // [eval]
  eval::EvaluateOptions eval_options;
  std::string eval_checkpoint;
  std::string eval_probe_checkpoint;

  // [sweep]
  std::vector<Scalar> sweep_fractions = {0.01, 0.1, 1.0};
  std::vector<std::uint64_t> sweep_seeds = {0};
  bool sweep_with_baseline = false;

  // [output]
  std::string output_root = "runs";

  /// Canonical serialisation: sorted section.key = value lines. Hashing this
  /// text yields the run id.
  std::string resolved_text() const;
  std::string run_id() const;
};

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

}  // namespace nodex
