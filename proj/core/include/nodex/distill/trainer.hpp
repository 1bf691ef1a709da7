#pragma once

#include <filesystem>
#include <functional>

#include "nodex/augment/augment.hpp"
#include "nodex/distill/ops.hpp"
#include "nodex/distill/schedule.hpp"
#include "nodex/model/checkpoint.hpp"
#include "nodex/model/encoder.hpp"
#include "nodex/model/head.hpp"

namespace nodex::distill {

struct Stage1Config {
  augment::ViewConfig views;
  model::EncoderConfig encoder;
  model::ProjectionHeadConfig head;
  TemperatureConfig temperatures;
  ScheduleConfig schedule;
  std::uint64_t seed = 0;
  bool centering = true;  // disable only for the collapse comparison
  std::string init_checkpoint;
  int checkpoint_every_epochs = 0;  // 0: final checkpoint only
};

struct StepRecord {
  long step = 0;
  Scalar loss = 0;
  Scalar lr = 0;
  Scalar m = 0;
  Scalar center_norm = 0;
  Scalar teacher_entropy = 0;  // mean row entropy of sharpened teacher outputs
};

/// Called after every completed step (student updated, EMA applied, center
/// refreshed). Used by the log writer and by replay checks.
using StepObserver =
    std::function<void(const StepRecord&, const nn::ParamStore& student,
                       const nn::ParamStore& teacher)>;

/// Two-branch self-distillation trainer. The student branch carries
/// gradients and is optimised with AdamW; the teacher branch is a frozen
/// store refreshed only through the parameter EMA, and its sharpened outputs
/// are centred to keep them from collapsing onto a single dimension.
class Stage1Trainer {
public:
  explicit Stage1Trainer(const Stage1Config& config);

  /// Runs the configured horizon over the given patches. When run_dir is
  /// non-empty, writes train_log.jsonl (one record per step), periodic and
  /// final checkpoints. A non-finite loss dumps state and raises.
  void run(const std::vector<Matrix>& patches,
           const std::filesystem::path& run_dir = {}, const StepObserver& observer = nullptr);

  const nn::ParamStore& teacher_params() const { return teacher_store_; }
  const nn::ParamStore& student_params() const { return student_store_; }
  const Vector& center() const { return center_; }
  const std::vector<StepRecord>& log() const { return log_; }
  const Stage1Config& config() const { return cfg_; }

  void save_checkpoint(const std::filesystem::path& path) const;

  static std::string log_line(const StepRecord& r);

private:
  struct Branch {
    std::unique_ptr<model::Encoder> encoder;
    std::unique_ptr<model::ProjectionHead> head;

    Matrix forward(const Matrix& views, int size) {
      return head->forward(
          encoder->forward(views, size, size, model::FeatureSource::final_token));
    }
    void backward(const Matrix& dlogits) { encoder->backward(head->backward(dlogits)); }
  };

  Branch make_branch(nn::ParamStore& store, Rng& rng);
  void load_init_checkpoint(const std::string& path);

  Stage1Config cfg_;
  nn::ParamStore student_store_{true};
  nn::ParamStore teacher_store_{false};
  Branch student_global_, student_local_, teacher_global_;
  Vector center_;
  std::vector<StepRecord> log_;
  long step_ = 0;
  int epoch_ = 0;
};

/// Stage-1 checkpoints: "teacher"/"student" stores plus the center vector.
/// Loads the teacher encoder for downstream stages.
struct EncoderHandle {
  model::EncoderConfig config;
  nn::ParamStore store{false};
  std::unique_ptr<model::Encoder> encoder;
};

std::unique_ptr<EncoderHandle> load_frozen_encoder(const std::filesystem::path& checkpoint_path);

}  // namespace nodex::distill
