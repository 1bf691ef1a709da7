#include <doctest.h>

#include <cmath>

#include "nodex/distill/ops.hpp"
#include "nodex/distill/schedule.hpp"
#include "nodex/rng.hpp"

using namespace nodex;
using namespace nodex::distill;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, Scalar scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

/// Naive scalar-loop softmax oracle, independent of the Eigen path.
std::vector<Scalar> softmax_oracle(const std::vector<Scalar>& z, Scalar tau,
                                   const std::vector<Scalar>* center) {
  std::vector<Scalar> shifted(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    shifted[i] = (z[i] - (center ? (*center)[i] : 0.0)) / tau;
  Scalar mx = shifted[0];
  for (Scalar v : shifted) mx = std::max(mx, v);
  Scalar sum = 0;
  std::vector<Scalar> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(shifted[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

}  // namespace

TEST_CASE("sharpen: zero logits give uniform rows") {
  Matrix z = Matrix::Zero(3, 8);
  Matrix p = sharpen(z, 0.04);
  for (Eigen::Index r = 0; r < 3; ++r)
    for (Eigen::Index c = 0; c < 8; ++c) CHECK(p(r, c) == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("sharpen: logits equal to the center give uniform rows") {
  Rng rng(1);
  Vector center = random_matrix(5, 1, rng).col(0);
  Matrix z = center.transpose().replicate(2, 1);
  Matrix p = sharpen(z, 0.1, &center);
  for (Eigen::Index r = 0; r < 2; ++r)
    for (Eigen::Index c = 0; c < 5; ++c) CHECK(p(r, c) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("sharpen: K=3 closed-form values") {
  Matrix z(1, 3);
  z << 1, 2, 3;
  Matrix p = sharpen(z, 1.0);
  CHECK(p(0, 0) == doctest::Approx(0.09003057).epsilon(1e-6));
  CHECK(p(0, 1) == doctest::Approx(0.24472847).epsilon(1e-6));
  CHECK(p(0, 2) == doctest::Approx(0.66524096).epsilon(1e-6));
}

TEST_CASE("sharpen: rows sum to one and match the scalar oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    int k = static_cast<int>(rng.uniform_int(2, 8));
    int n = static_cast<int>(rng.uniform_int(1, 4));
    Scalar tau = rng.uniform(0.02, 2.0);
    Matrix z = random_matrix(n, k, rng, 3.0);
    bool with_center = rng.bernoulli(0.5);
    Vector center = random_matrix(k, 1, rng).col(0);
    Matrix p = sharpen(z, tau, with_center ? &center : nullptr);
    for (int r = 0; r < n; ++r) {
      CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-6);
      std::vector<Scalar> zrow(static_cast<std::size_t>(k)), crow(static_cast<std::size_t>(k));
      for (int c = 0; c < k; ++c) {
        zrow[static_cast<std::size_t>(c)] = z(r, c);
        crow[static_cast<std::size_t>(c)] = center(c);
      }
      auto oracle = softmax_oracle(zrow, tau, with_center ? &crow : nullptr);
      for (int c = 0; c < k; ++c)
        CHECK(std::abs(p(r, c) - oracle[static_cast<std::size_t>(c)]) < 1e-9);
    }
  }
}

TEST_CASE("sharpen: centering invariance under constant shifts") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix z = random_matrix(2, 6, rng);
    Vector mu = random_matrix(6, 1, rng).col(0);
    Scalar shift = rng.normal();
    Matrix z2 = z.array() + shift;
    Vector mu2 = mu.array() + shift;
    Matrix a = sharpen(z, 0.07, &mu);
    Matrix b = sharpen(z2, 0.07, &mu2);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sharpen: non-finite logits raise") {
  Matrix z(1, 2);
  z << 1.0, std::numeric_limits<Scalar>::quiet_NaN();
  CHECK_THROWS_AS(sharpen(z, 0.1), InvalidInput);
  CHECK_THROWS_AS(sharpen(Matrix::Zero(1, 2), 0.0), InvalidInput);
}

TEST_CASE("distillation_loss: one-hot agreement gives zero loss") {
  Matrix onehot = Matrix::Zero(2, 4);
  onehot(0, 1) = 1.0;
  onehot(1, 3) = 1.0;
  std::vector<Matrix> teacher = {onehot, onehot};
  std::vector<Matrix> student = {onehot, onehot, onehot};
  auto res = distillation_loss(teacher, student);
  CHECK(res.value == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("distillation_loss: 2 global + 8 local views enumerate 18 ordered pairs") {
  Rng rng(4);
  Matrix base = sharpen(random_matrix(2, 4, rng), 1.0);
  std::vector<Matrix> teacher = {base, base};
  std::vector<Matrix> student(10, base);
  auto res = distillation_loss(teacher, student);
  CHECK(res.pair_count == 18);
  CHECK(res.pairs.size() == 18);
  // Self pairs excluded: (0,0) and (1,1) never appear.
  for (auto [t, s] : res.pairs) CHECK(t != s);
}

TEST_CASE("distillation_loss: uniform teacher, uniform student gives log K per pair") {
  int k = 4;
  Matrix uniform = Matrix::Constant(3, k, 1.0 / k);
  std::vector<Matrix> teacher = {uniform, uniform};
  std::vector<Matrix> student = {uniform, uniform, uniform};
  auto res = distillation_loss(teacher, student);
  CHECK(res.value == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("distillation_loss: matches a scalar oracle on random instances") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    int k = static_cast<int>(rng.uniform_int(2, 8));
    int n = static_cast<int>(rng.uniform_int(1, 4));
    int n_global = 2;
    int n_views = static_cast<int>(rng.uniform_int(2, 5));
    std::vector<Matrix> teacher, student;
    for (int g = 0; g < n_global; ++g)
      teacher.push_back(sharpen(random_matrix(n, k, rng), 0.5));
    for (int v = 0; v < n_views; ++v)
      student.push_back(sharpen(random_matrix(n, k, rng), 0.5));

    auto res = distillation_loss(teacher, student);

    Scalar oracle = 0;
    int pairs = 0;
    for (int t = 0; t < n_global; ++t)
      for (int s = 0; s < n_views; ++s) {
        if (s == t) continue;
        Scalar ce = 0;
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < k; ++c)
            ce -= teacher[static_cast<std::size_t>(t)](r, c) *
                  std::log(student[static_cast<std::size_t>(s)](r, c));
        oracle += ce / n;
        ++pairs;
      }
    oracle /= pairs;
    CHECK(std::abs(res.value - oracle) < 1e-9);
    CHECK(res.pair_count == pairs);
  }
}

TEST_CASE("distillation_loss: cross-entropy dominates teacher entropy per pair") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    int k = static_cast<int>(rng.uniform_int(2, 6));
    Matrix t = sharpen(random_matrix(2, k, rng), 0.7);
    Matrix s = sharpen(random_matrix(2, k, rng), 0.7);
    std::vector<Matrix> teacher = {t, t};
    std::vector<Matrix> student = {s, s, s};
    auto res = distillation_loss(teacher, student);
    CHECK(res.value >= mean_row_entropy(t) - 1e-9);
  }
}

TEST_CASE("distillation_loss_grad: value matches the probability-space op") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    int k = static_cast<int>(rng.uniform_int(2, 8));
    Scalar tau = rng.uniform(0.1, 1.5);
    std::vector<Matrix> teacher = {sharpen(random_matrix(2, k, rng), 0.3),
                                   sharpen(random_matrix(2, k, rng), 0.3)};
    std::vector<Matrix> logits = {random_matrix(2, k, rng), random_matrix(2, k, rng),
                                  random_matrix(2, k, rng)};
    std::vector<Matrix> probs;
    for (const auto& z : logits) probs.push_back(sharpen(z, tau));
    std::vector<Matrix> grads;
    auto fused = distillation_loss_grad(teacher, logits, tau, &grads);
    auto pure = distillation_loss(teacher, probs);
    CHECK(std::abs(fused.value - pure.value) < 1e-12);
    CHECK(grads.size() == logits.size());
  }
}

TEST_CASE("update_center: arithmetic identities") {
  Vector mu = Vector::Zero(2);
  Matrix rows(2, 2);
  rows << 1, 1, 1, 1;
  Vector out = update_center(mu, rows, 0.9);
  CHECK(out(0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(out(1) == doctest::Approx(0.1).epsilon(1e-12));

  // Fixed point: mu already equals the batch mean.
  Vector mu2(2);
  mu2 << 1, 1;
  Vector out2 = update_center(mu2, rows, 0.42);
  CHECK((out2 - mu2).cwiseAbs().maxCoeff() < 1e-15);

  // Small-step algebra: mu' - mu = (1-lambda)(mean - mu).
  Rng rng(8);
  Vector mu3 = random_matrix(4, 1, rng).col(0);
  Matrix batch = random_matrix(6, 4, rng);
  Vector out3 = update_center(mu3, batch, 0.99);
  Vector expected = 0.01 * (batch.colwise().mean().transpose() - mu3);
  CHECK(((out3 - mu3) - expected).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(update_center(mu3, batch, 1.0), InvalidInput);
}

TEST_CASE("ema_update_params: endpoint and midpoint behaviour") {
  nn::ParamStore teacher(false), student(true);
  teacher.create("w", 1, 1).value(0, 0) = 2.0;
  student.create("w", 1, 1).value(0, 0) = 4.0;

  ema_update_params(teacher, student, 1.0);
  CHECK(teacher.get("w").value(0, 0) == 2.0);
  ema_update_params(teacher, student, 0.5);
  CHECK(teacher.get("w").value(0, 0) == 3.0);
  ema_update_params(teacher, student, 0.0);
  CHECK(teacher.get("w").value(0, 0) == 4.0);

  nn::ParamStore mismatched(false);
  mismatched.create("other", 1, 1);
  CHECK_THROWS_AS(ema_update_params(mismatched, student, 0.5), InvalidInput);
}

TEST_CASE("schedule: warmup, peak, final values") {
  ScheduleConfig cfg;
  cfg.epochs = 20;
  cfg.warmup_epochs = 2;
  cfg.peak_lr = 0.00025;
  cfg.final_lr = 1e-6;
  Schedule sched(cfg, /*steps_per_epoch=*/10);
  CHECK(sched.total_steps() == 200);

  CHECK(sched.lr_at(0) == 0.0);  // warmup starts at zero
  CHECK(sched.lr_at(20) == doctest::Approx(0.00025).epsilon(1e-12));  // end of warmup
  CHECK(sched.lr_at(199) == doctest::Approx(1e-6).epsilon(1e-12));    // final step
  CHECK(sched.momentum_at(0) == doctest::Approx(0.996).epsilon(1e-12));
  CHECK(sched.momentum_at(199) == doctest::Approx(1.0).epsilon(1e-12));
  for (long s = 0; s < 199; ++s) CHECK(sched.momentum_at(s) < 1.0);

  // Continuity across the warmup boundary.
  Scalar before = sched.lr_at(19);
  Scalar at = sched.lr_at(20);
  CHECK(std::abs(at - before) < 0.00025 * 0.06);

  // Non-increasing after warmup, non-negative everywhere.
  for (long s = 21; s < 200; ++s) {
    CHECK(sched.lr_at(s) <= sched.lr_at(s - 1) + 1e-15);
    CHECK(sched.lr_at(s) >= 0.0);
  }
  CHECK_THROWS_AS(sched.lr_at(200), InvalidInput);
}
