#include "nodex/distill/trainer.hpp"

#include <cmath>
#include <fstream>

#include "nodex/nn/optim.hpp"

namespace nodex::distill {

namespace fs = std::filesystem;
using nlohmann::json;

Stage1Trainer::Branch Stage1Trainer::make_branch(nn::ParamStore& store, Rng& rng) {
  Branch b;
  b.encoder = model::make_encoder(cfg_.encoder, store, rng);
  b.head = std::make_unique<model::ProjectionHead>(cfg_.head, cfg_.encoder.base_dim(), store, rng);
  return b;
}

Stage1Trainer::Stage1Trainer(const Stage1Config& config) : cfg_(config) {
  cfg_.views.validate();
  cfg_.encoder.validate();
  cfg_.head.validate();
  cfg_.temperatures.validate();
  cfg_.schedule.validate();

  Rng init_rng(derive_seed(cfg_.seed, "init"));
  student_global_ = make_branch(student_store_, init_rng);
  if (cfg_.views.n_local > 0) student_local_ = make_branch(student_store_, init_rng);

  if (!cfg_.init_checkpoint.empty()) load_init_checkpoint(cfg_.init_checkpoint);

  // The auxiliary/primary branches start as identical copies.
  Rng dummy(1);
  teacher_global_ = make_branch(teacher_store_, dummy);
  teacher_store_.copy_values_from(student_store_);

  center_ = Vector::Zero(cfg_.head.output_dim);
}

void Stage1Trainer::load_init_checkpoint(const std::string& path) {
  model::Checkpoint ckpt = model::Checkpoint::load(path);
  // Accept either a stage-1 checkpoint (teacher branch) or a bare encoder
  // export; only encoder tensors are consumed, heads stay at random init.
  std::string prefix;
  for (const char* cand : {"teacher", "encoder_only"}) {
    if (ckpt.has_tensor(std::string(cand) + ".encoder.cls") ||
        ckpt.has_tensor(std::string(cand) + ".encoder.stem.weight")) {
      prefix = cand;
      break;
    }
  }
  NODEX_REQUIRE(!prefix.empty(),
                "init checkpoint " + path + " contains no encoder tensors");
  std::vector<std::string> problems;
  for (nn::Parameter* p : student_store_.all()) {
    if (p->name.rfind("encoder.", 0) != 0) continue;
    std::string key = prefix + "." + p->name;
    if (!ckpt.has_tensor(key)) {
      problems.push_back("missing tensor " + key);
      continue;
    }
    const Matrix& t = ckpt.tensor(key);
    if (t.rows() != p->value.rows() || t.cols() != p->value.cols()) {
      problems.push_back("shape mismatch for " + key + ": checkpoint " +
                         std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ", model " +
                         std::to_string(p->value.rows()) + "x" +
                         std::to_string(p->value.cols()));
      continue;
    }
    p->value = t;
  }
  if (!problems.empty()) {
    std::string msg = "init checkpoint incompatible:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw RuntimeFailure(msg);
  }
}

std::string Stage1Trainer::log_line(const StepRecord& r) {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "{\"step\":%ld,\"loss\":%.17g,\"lr\":%.17g,\"m\":%.17g,"
                "\"center_norm\":%.17g,\"teacher_entropy\":%.17g}",
                r.step, r.loss, r.lr, r.m, r.center_norm, r.teacher_entropy);
  return buf;
}

void Stage1Trainer::run(const std::vector<Matrix>& patches, const fs::path& run_dir,
                        const StepObserver& observer) {
  NODEX_CHECK(!patches.empty(), "train_stage1: empty dataset");
  const long n = static_cast<long>(patches.size());
  const long batch = std::min<long>(cfg_.schedule.batch_size, n);
  const long steps_per_epoch = (n + batch - 1) / batch;
  Schedule schedule(cfg_.schedule, steps_per_epoch);

  nn::AdamW opt(student_store_.all());

  std::ofstream log_file;
  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    log_file.open(run_dir / "train_log.jsonl");
    NODEX_REQUIRE(log_file.good(), "train_stage1: cannot open log in " + run_dir.string());
  }

  const int n_global = cfg_.views.n_global;
  const int n_local = cfg_.views.n_local;
  const int gs = cfg_.views.global_size;
  const int ls = cfg_.views.local_size;

  std::vector<std::size_t> order(patches.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (epoch_ = 0; epoch_ < cfg_.schedule.epochs; ++epoch_) {
    Rng shuffle_rng(derive_seed(cfg_.seed, "shuffle", static_cast<std::uint64_t>(epoch_)));
    shuffle_rng.shuffle(order);

    for (long b = 0; b < steps_per_epoch; ++b) {
      const long lo = b * batch;
      const long hi = std::min(lo + batch, n);
      std::vector<Matrix> batch_patches;
      batch_patches.reserve(static_cast<std::size_t>(hi - lo));
      for (long i = lo; i < hi; ++i)
        batch_patches.push_back(patches[order[static_cast<std::size_t>(i)]]);
      const Eigen::Index bn = static_cast<Eigen::Index>(batch_patches.size());

      augment::ViewConfig vc = cfg_.views;
      vc.seed = derive_seed(cfg_.seed, "views", static_cast<std::uint64_t>(step_));
      augment::ViewBatch views = augment::make_views(batch_patches, vc);

      // Teacher: all global views in one stacked forward, no gradients.
      Matrix global_stack(bn * n_global, static_cast<Eigen::Index>(gs) * gs);
      for (int g = 0; g < n_global; ++g)
        global_stack.middleRows(static_cast<Eigen::Index>(g) * bn, bn) =
            views.global_views[static_cast<std::size_t>(g)];
      Matrix z_teacher = teacher_global_.forward(global_stack, gs);
      std::vector<Matrix> teacher_probs(static_cast<std::size_t>(n_global));
      for (int g = 0; g < n_global; ++g)
        teacher_probs[static_cast<std::size_t>(g)] =
            sharpen(z_teacher.middleRows(static_cast<Eigen::Index>(g) * bn, bn),
                    cfg_.temperatures.tau_teacher, cfg_.centering ? &center_ : nullptr);

      // Student: one stacked forward per view scale.
      Matrix z_student_g = student_global_.forward(global_stack, gs);
      Matrix z_student_l;
      if (n_local > 0) {
        Matrix local_stack(bn * n_local, static_cast<Eigen::Index>(ls) * ls);
        for (int l = 0; l < n_local; ++l)
          local_stack.middleRows(static_cast<Eigen::Index>(l) * bn, bn) =
              views.local_views[static_cast<std::size_t>(l)];
        z_student_l = student_local_.forward(local_stack, ls);
      }

      std::vector<Matrix> student_logits;
      for (int g = 0; g < n_global; ++g)
        student_logits.push_back(z_student_g.middleRows(static_cast<Eigen::Index>(g) * bn, bn));
      for (int l = 0; l < n_local; ++l)
        student_logits.push_back(z_student_l.middleRows(static_cast<Eigen::Index>(l) * bn, bn));

      std::vector<Matrix> dlogits;
      DistillLossResult loss = distillation_loss_grad(
          teacher_probs, student_logits, cfg_.temperatures.tau_student, &dlogits);

      if (!std::isfinite(loss.value)) {
        if (!run_dir.empty()) save_checkpoint(run_dir / "abort_state.bin");
        throw RuntimeFailure("train_stage1: non-finite loss at step " + std::to_string(step_) +
                             (run_dir.empty() ? "" : "; state dumped to abort_state.bin"));
      }

      student_store_.zero_grads();
      Matrix dz_g(bn * n_global, z_student_g.cols());
      for (int g = 0; g < n_global; ++g)
        dz_g.middleRows(static_cast<Eigen::Index>(g) * bn, bn) =
            dlogits[static_cast<std::size_t>(g)];
      student_global_.backward(dz_g);
      if (n_local > 0) {
        Matrix dz_l(bn * n_local, z_student_l.cols());
        for (int l = 0; l < n_local; ++l)
          dz_l.middleRows(static_cast<Eigen::Index>(l) * bn, bn) =
              dlogits[static_cast<std::size_t>(n_global + l)];
        student_local_.backward(dz_l);
      }

      if (epoch_ < cfg_.schedule.freeze_last_layer_epochs) {
        student_store_.get("head.last.v").grad.setZero();
        student_store_.get("head.last.g").grad.setZero();
      }

      const Scalar lr = schedule.lr_at(step_);
      const Scalar m = schedule.momentum_at(step_);
      opt.step(lr, schedule.weight_decay_at(step_));
      ema_update_params(teacher_store_, student_store_, m);
      if (cfg_.centering)
        center_ = update_center(center_, z_teacher, cfg_.schedule.center_momentum);

      Matrix teacher_prob_stack(bn * n_global, z_teacher.cols());
      for (int g = 0; g < n_global; ++g)
        teacher_prob_stack.middleRows(static_cast<Eigen::Index>(g) * bn, bn) =
            teacher_probs[static_cast<std::size_t>(g)];

      StepRecord rec;
      rec.step = step_;
      rec.loss = loss.value;
      rec.lr = lr;
      rec.m = m;
      rec.center_norm = center_.norm();
      rec.teacher_entropy = mean_row_entropy(teacher_prob_stack);
      log_.push_back(rec);
      if (log_file.is_open()) log_file << log_line(rec) << "\n";
      if (observer) observer(rec, student_store_, teacher_store_);
      ++step_;
    }

    if (!run_dir.empty() && cfg_.checkpoint_every_epochs > 0 &&
        (epoch_ + 1) % cfg_.checkpoint_every_epochs == 0)
      save_checkpoint(run_dir / ("checkpoint_epoch" + std::to_string(epoch_ + 1) + ".bin"));
  }

  if (!run_dir.empty()) save_checkpoint(run_dir / "checkpoint.bin");
}

void Stage1Trainer::save_checkpoint(const fs::path& path) const {
  json meta;
  meta["stage"] = "stage1";
  meta["tool_version"] = kVersion;
  meta["encoder"] = cfg_.encoder.to_json();
  meta["head"] = cfg_.head.to_json();
  meta["tau_teacher"] = cfg_.temperatures.tau_teacher;
  meta["tau_student"] = cfg_.temperatures.tau_student;
  meta["centering"] = cfg_.centering;
  meta["step"] = step_;
  meta["epoch"] = epoch_;
  Matrix center_row = center_.transpose();
  model::save_checkpoint(path, meta,
                         {{"teacher", &teacher_store_}, {"student", &student_store_}},
                         {{"center", center_row}});
}

std::unique_ptr<EncoderHandle> load_frozen_encoder(const fs::path& checkpoint_path) {
  model::Checkpoint ckpt = model::Checkpoint::load(checkpoint_path);
  auto handle = std::make_unique<EncoderHandle>();
  handle->config = model::EncoderConfig::from_json(ckpt.meta().at("encoder"));
  Rng dummy(1);
  handle->encoder = model::make_encoder(handle->config, handle->store, dummy);
  ckpt.load_into("teacher", handle->store);
  return handle;
}

}  // namespace nodex::distill
