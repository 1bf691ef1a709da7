#pragma once

#include "nodex/nn/core.hpp"

namespace nodex::distill {

struct TemperatureConfig {
  Scalar tau_teacher = 0.04;  // sharper side, centred
  Scalar tau_student = 0.1;

  void validate() const {
    NODEX_CHECK(tau_teacher > 0 && tau_student > 0, "temperatures must be positive");
    NODEX_CHECK(tau_teacher < tau_student, "teacher temperature must be below student's");
  }
};

/// Temperature-scaled softmax rows, with the centering bias subtracted first
/// when a center is given (teacher side only). Rows sum to 1; non-finite
/// logits raise.
Matrix sharpen(const Matrix& logits, Scalar temperature, const Vector* center = nullptr);

/// Mean entropy of probability rows, -sum p log p with the log clamp.
Scalar mean_row_entropy(const Matrix& probs);

struct DistillLossResult {
  Scalar value = 0;
  int pair_count = 0;
  std::vector<std::pair<int, int>> pairs;  // (teacher slot, student slot)
};

/// Cross-view cross-entropy: teacher distributions over the global slots are
/// matched against student distributions over every slot except the same
/// view. Per pair the batch mean of -sum p_t log p_s is taken; pairs are
/// averaged. Student slots are ordered globals-then-locals so slot indices
/// align with teacher slots. log runs on probabilities clamped at 1e-12.
DistillLossResult distillation_loss(const std::vector<Matrix>& teacher_probs,
                                    const std::vector<Matrix>& student_probs);

/// Same enumeration fused with the student softmax: takes raw student logits
/// plus the student temperature and emits dL/dlogits per student slot
/// (teacher rows are constants). The returned value equals
/// distillation_loss on softmax(logits/tau) to rounding error.
DistillLossResult distillation_loss_grad(const std::vector<Matrix>& teacher_probs,
                                         const std::vector<Matrix>& student_logits,
                                         Scalar tau_student, std::vector<Matrix>* dlogits);

/// Centering update: mu' = lambda*mu + (1-lambda)*colmean(rows). The rows
/// are every teacher output in the step (both global views pooled).
Vector update_center(const Vector& mu, const Matrix& teacher_logits, Scalar lambda);

/// Elementwise EMA of parameter values: teacher <- m*teacher + (1-m)*student.
/// Structures must match exactly.
void ema_update_params(nn::ParamStore& teacher, const nn::ParamStore& student, Scalar m);

}  // namespace nodex::distill
