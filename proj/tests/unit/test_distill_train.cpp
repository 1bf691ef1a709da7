#include <doctest.h>

#include <filesystem>

#include "toy_configs.hpp"

using namespace nodex;
using namespace nodex::distill;
namespace fs = std::filesystem;

TEST_CASE("train_stage1: one epoch over 4 samples at batch 4 logs one step") {
  auto ds = data::generate_synthetic_dataset(10, 1, 1);
  std::vector<Matrix> patches(ds.samples.size());
  for (std::size_t i = 0; i < 4; ++i) patches[i] = ds.samples[i].patch;
  patches.resize(4);

  Stage1Trainer trainer(testutil::toy_stage1(1, 4, 7));
  trainer.run(patches);
  CHECK(trainer.log().size() == 1);
  CHECK(trainer.log()[0].step == 0);
}

TEST_CASE("train_stage1: teacher has no gradient buffers and follows the EMA replay") {
  auto ds = data::generate_synthetic_dataset(16, 2, 1);
  auto patches = testutil::all_patches(ds);

  Stage1Config cfg = testutil::toy_stage1(2, 8, 3);
  Stage1Trainer trainer(cfg);

  // Snapshot of the initial teacher (equal to the student copy).
  std::vector<Matrix> replay;
  for (const nn::Parameter* p : trainer.teacher_params().all()) replay.push_back(p->value);

  std::vector<Scalar> momenta;
  std::vector<std::vector<Matrix>> student_snaps;
  trainer.run(patches, {}, [&](const StepRecord& rec, const nn::ParamStore& student,
                               const nn::ParamStore& teacher) {
    momenta.push_back(rec.m);
    std::vector<Matrix> snap;
    for (const nn::Parameter* p : student.all()) snap.push_back(p->value);
    student_snaps.push_back(std::move(snap));
    (void)teacher;
  });
  REQUIRE(trainer.log().size() == 4);

  // No gradient storage exists on any teacher parameter.
  for (const nn::Parameter* p : trainer.teacher_params().all()) {
    CHECK_FALSE(p->trainable);
    CHECK(p->grad.size() == 0);
  }

  // Replay teacher_k = m_k teacher_{k-1} + (1-m_k) student_k.
  for (std::size_t k = 0; k < student_snaps.size(); ++k)
    for (std::size_t i = 0; i < replay.size(); ++i)
      replay[i] = momenta[k] * replay[i] + (1.0 - momenta[k]) * student_snaps[k][i];

  auto final_teacher = trainer.teacher_params().all();
  for (std::size_t i = 0; i < replay.size(); ++i) {
    Scalar denom = std::max(1.0, replay[i].cwiseAbs().maxCoeff());
    CHECK((final_teacher[i]->value - replay[i]).cwiseAbs().maxCoeff() / denom < 1e-6);
  }
}

TEST_CASE("train_stage1: loss and entropy are logged per step with schedules") {
  auto ds = data::generate_synthetic_dataset(12, 3, 1);
  auto patches = testutil::all_patches(ds);
  Stage1Config cfg = testutil::toy_stage1(2, 6, 9);
  Stage1Trainer trainer(cfg);
  trainer.run(patches);
  REQUIRE(trainer.log().size() == 4);
  for (const auto& rec : trainer.log()) {
    CHECK(std::isfinite(rec.loss));
    CHECK(rec.teacher_entropy >= 0.0);
    CHECK(rec.lr >= 0.0);
    CHECK(rec.m >= 0.996);
  }
  // No warmup in the toy config: step 0 starts at the peak learning rate.
  CHECK(trainer.log()[0].lr == doctest::Approx(1e-3));
}

TEST_CASE("train_stage1: checkpoints reload into a frozen encoder") {
  fs::path dir = fs::temp_directory_path() / "nodex_test_stage1";
  fs::remove_all(dir);
  auto ds = data::generate_synthetic_dataset(12, 4, 1);
  auto patches = testutil::all_patches(ds);
  Stage1Trainer trainer(testutil::toy_stage1(1, 6, 11));
  trainer.run(patches, dir);
  CHECK(fs::exists(dir / "train_log.jsonl"));
  CHECK(fs::exists(dir / "checkpoint.bin"));

  auto handle = load_frozen_encoder(dir / "checkpoint.bin");
  CHECK(handle->config.embed_dim == 32);
  CHECK_FALSE(handle->store.trainable());

  // Teacher values round-trip exactly.
  auto teacher = trainer.teacher_params().all();
  for (const nn::Parameter* p : handle->store.all()) {
    const nn::Parameter* src = nullptr;
    for (const nn::Parameter* t : teacher)
      if (t->name == p->name) src = t;
    REQUIRE(src != nullptr);
    CHECK((src->value - p->value).cwiseAbs().maxCoeff() == 0.0);
  }

  // A fresh trainer can consume the checkpoint as initialisation.
  Stage1Config cfg2 = testutil::toy_stage1(1, 6, 12);
  cfg2.init_checkpoint = (dir / "checkpoint.bin").string();
  Stage1Trainer resumed(cfg2);
  for (const nn::Parameter* p : resumed.student_params().all()) {
    if (p->name.rfind("encoder.", 0) != 0) continue;
    CHECK((p->value - handle->store.get(p->name).value).cwiseAbs().maxCoeff() == 0.0);
  }

  // Mismatched architecture raises a structured error.
  Stage1Config cfg3 = testutil::toy_stage1(1, 6, 13);
  cfg3.encoder.embed_dim = 16;
  cfg3.encoder.n_heads = 2;
  cfg3.init_checkpoint = (dir / "checkpoint.bin").string();
  CHECK_THROWS_AS(Stage1Trainer{cfg3}, RuntimeFailure);
}

TEST_CASE("train_stage1: trainer reruns are deterministic") {
  auto ds = data::generate_synthetic_dataset(12, 5, 1);
  auto patches = testutil::all_patches(ds);
  Stage1Trainer a(testutil::toy_stage1(1, 6, 21));
  Stage1Trainer b(testutil::toy_stage1(1, 6, 21));
  a.run(patches);
  b.run(patches);
  REQUIRE(a.log().size() == b.log().size());
  for (std::size_t i = 0; i < a.log().size(); ++i) CHECK(a.log()[i].loss == b.log()[i].loss);
}
