#include "nodex/distill/ops.hpp"

#include <cmath>

namespace nodex::distill {

namespace {
constexpr Scalar kLogEps = 1e-12;
}

Matrix sharpen(const Matrix& logits, Scalar temperature, const Vector* center) {
  NODEX_CHECK(temperature > 0, "sharpen: temperature must be positive");
  NODEX_CHECK(logits.allFinite(), "sharpen: non-finite logits");
  if (center)
    NODEX_CHECK(center->size() == logits.cols(), "sharpen: center dimension mismatch");

  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    ArrayX z = logits.row(r).transpose().array();
    if (center) z -= center->array();
    z /= temperature;
    Scalar mx = z.maxCoeff();
    ArrayX e = (z - mx).exp();
    out.row(r) = (e / e.sum()).matrix().transpose();
  }
  return out;
}

Scalar mean_row_entropy(const Matrix& probs) {
  Scalar total = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r)
    for (Eigen::Index c = 0; c < probs.cols(); ++c)
      total -= probs(r, c) * std::log(std::max(probs(r, c), kLogEps));
  return total / static_cast<Scalar>(probs.rows());
}

DistillLossResult distillation_loss(const std::vector<Matrix>& teacher_probs,
                                    const std::vector<Matrix>& student_probs) {
  NODEX_CHECK(!teacher_probs.empty(), "distillation_loss: no teacher views");
  NODEX_CHECK(student_probs.size() >= teacher_probs.size(),
              "distillation_loss: student must cover at least the global views");

  DistillLossResult res;
  for (std::size_t t = 0; t < teacher_probs.size(); ++t) {
    for (std::size_t s = 0; s < student_probs.size(); ++s) {
      if (s == t) continue;  // same view never pairs with itself
      const Matrix& pt = teacher_probs[t];
      const Matrix& ps = student_probs[s];
      NODEX_CHECK(pt.rows() == ps.rows() && pt.cols() == ps.cols(),
                  "distillation_loss: probability shape mismatch");
      Scalar pair_ce = 0;
      for (Eigen::Index r = 0; r < pt.rows(); ++r)
        for (Eigen::Index c = 0; c < pt.cols(); ++c)
          pair_ce -= pt(r, c) * std::log(std::max(ps(r, c), kLogEps));
      res.value += pair_ce / static_cast<Scalar>(pt.rows());
      res.pairs.emplace_back(static_cast<int>(t), static_cast<int>(s));
      ++res.pair_count;
    }
  }
  NODEX_CHECK(res.pair_count > 0, "distillation_loss: no view pairs to compare");
  res.value /= static_cast<Scalar>(res.pair_count);
  return res;
}

DistillLossResult distillation_loss_grad(const std::vector<Matrix>& teacher_probs,
                                         const std::vector<Matrix>& student_logits,
                                         Scalar tau_student, std::vector<Matrix>* dlogits) {
  std::vector<Matrix> student_probs;
  student_probs.reserve(student_logits.size());
  for (const Matrix& z : student_logits) student_probs.push_back(sharpen(z, tau_student));

  DistillLossResult res = distillation_loss(teacher_probs, student_probs);

  if (dlogits) {
    dlogits->clear();
    for (const Matrix& z : student_logits) dlogits->push_back(Matrix::Zero(z.rows(), z.cols()));
    const Scalar batch = static_cast<Scalar>(student_logits.front().rows());
    const Scalar scale = 1.0 / (tau_student * batch * static_cast<Scalar>(res.pair_count));
    for (const auto& [t, s] : res.pairs) {
      (*dlogits)[static_cast<std::size_t>(s)] +=
          scale * (student_probs[static_cast<std::size_t>(s)] -
                   teacher_probs[static_cast<std::size_t>(t)]);
    }
  }
  return res;
}

Vector update_center(const Vector& mu, const Matrix& teacher_logits, Scalar lambda) {
  NODEX_CHECK(lambda >= 0 && lambda < 1, "update_center: lambda must be in [0,1)");
  NODEX_CHECK(teacher_logits.rows() > 0, "update_center: empty batch");
  NODEX_CHECK(mu.size() == teacher_logits.cols(), "update_center: dimension mismatch");
  Vector batch_mean = teacher_logits.colwise().mean().transpose();
  return lambda * mu + (1.0 - lambda) * batch_mean;
}

void ema_update_params(nn::ParamStore& teacher, const nn::ParamStore& student, Scalar m) {
  NODEX_CHECK(m >= 0 && m <= 1, "ema_update_params: momentum must be in [0,1]");
  NODEX_CHECK(teacher.matches(student), "ema_update_params: parameter structure mismatch");
  auto t = teacher.all();
  auto s = student.all();
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i]->value = m * t[i]->value + (1.0 - m) * s[i]->value;
}

}  // namespace nodex::distill
