#include "nodex/distill/schedule.hpp"

#include <cmath>

namespace nodex::distill {

void ScheduleConfig::validate() const {
  NODEX_CHECK(epochs >= 1, "schedule: epochs must be positive");
  NODEX_CHECK(batch_size >= 1, "schedule: batch size must be positive");
  NODEX_CHECK(warmup_epochs >= 0 && warmup_epochs <= epochs, "schedule: bad warmup span");
  NODEX_CHECK(peak_lr >= 0 && final_lr >= 0 && final_lr <= peak_lr, "schedule: bad lr range");
  NODEX_CHECK(center_momentum >= 0 && center_momentum < 1, "schedule: lambda must be in [0,1)");
  NODEX_CHECK(momentum_start >= 0 && momentum_start <= momentum_end && momentum_end <= 1.0,
              "schedule: bad momentum range");
}

Scalar cosine_interp(Scalar from, Scalar to, Scalar t) {
  t = std::min(std::max(t, 0.0), 1.0);
  return to + (from - to) * 0.5 * (1.0 + std::cos(M_PI * t));
}

Schedule::Schedule(const ScheduleConfig& config, long steps_per_epoch) : cfg_(config) {
  config.validate();
  NODEX_CHECK(steps_per_epoch >= 1, "schedule: steps_per_epoch must be positive");
  total_steps_ = static_cast<long>(config.epochs) * steps_per_epoch;
  warmup_steps_ = static_cast<long>(config.warmup_epochs) * steps_per_epoch;
}

Scalar Schedule::lr_at(long step) const {
  NODEX_CHECK(step >= 0 && step < total_steps_, "schedule: step outside horizon");
  if (step < warmup_steps_)
    return cfg_.peak_lr * static_cast<Scalar>(step) / static_cast<Scalar>(warmup_steps_);
  long span = total_steps_ - 1 - warmup_steps_;
  if (span <= 0) return cfg_.peak_lr;
  Scalar t = static_cast<Scalar>(step - warmup_steps_) / static_cast<Scalar>(span);
  return cosine_interp(cfg_.peak_lr, cfg_.final_lr, t);
}

Scalar Schedule::momentum_at(long step) const {
  NODEX_CHECK(step >= 0 && step < total_steps_, "schedule: step outside horizon");
  if (total_steps_ == 1) return cfg_.momentum_end;
  Scalar t = static_cast<Scalar>(step) / static_cast<Scalar>(total_steps_ - 1);
  return cosine_interp(cfg_.momentum_start, cfg_.momentum_end, t);
}

Scalar Schedule::weight_decay_at(long step) const {
  NODEX_CHECK(step >= 0 && step < total_steps_, "schedule: step outside horizon");
  if (total_steps_ == 1) return cfg_.weight_decay_end;
  Scalar t = static_cast<Scalar>(step) / static_cast<Scalar>(total_steps_ - 1);
  return cosine_interp(cfg_.weight_decay_start, cfg_.weight_decay_end, t);
}

}  // namespace nodex::distill
