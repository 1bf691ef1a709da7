#pragma once

#include "nodex/common.hpp"

namespace nodex::distill {

struct ScheduleConfig {
  int epochs = 300;
  int batch_size = 128;
  int warmup_epochs = 10;
  Scalar peak_lr = 0.00025;
  Scalar final_lr = 1e-6;
  Scalar center_momentum = 0.9;    // lambda
  Scalar momentum_start = 0.996;   // EMA momentum m, cosine to momentum_end
  Scalar momentum_end = 1.0;
  Scalar weight_decay_start = 0.04;
  Scalar weight_decay_end = 0.4;
  int freeze_last_layer_epochs = 0;

  void validate() const;
};

/// Per-step schedules: learning rate warms up linearly from 0 to peak_lr
/// over the warmup span, then follows a cosine to final_lr at the last step.
/// The EMA momentum and weight decay run cosines over the full horizon.
class Schedule {
public:
  Schedule(const ScheduleConfig& config, long steps_per_epoch);

  Scalar lr_at(long step) const;
  Scalar momentum_at(long step) const;
  Scalar weight_decay_at(long step) const;
  long total_steps() const { return total_steps_; }
  long warmup_steps() const { return warmup_steps_; }

private:
  ScheduleConfig cfg_;
  long total_steps_;
  long warmup_steps_;
};

/// cosine(a -> b) evaluated at t in [0,1].
Scalar cosine_interp(Scalar from, Scalar to, Scalar t);

}  // namespace nodex::distill
