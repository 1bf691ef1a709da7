#include "nodex/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "nodex/rng.hpp"

namespace nodex {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

/// Key-value pool with typed extraction; leftovers are unknown keys.
class KeyPool {
public:
  void put(const std::string& key, const std::string& value, int line) {
    if (values_.count(key))
      throw ConfigError("duplicate config key '" + key + "' (line " + std::to_string(line) + ")");
    values_[key] = value;
  }

  std::string take_string(const std::string& key, const std::string& fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    values_.erase(it);
    return v;
  }

  bool take_bool(const std::string& key, bool fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    values_.erase(it);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
  }

  long take_int(const std::string& key, long fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    values_.erase(it);
    try {
      std::size_t pos = 0;
      long out = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return out;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
  }

  std::uint64_t take_u64(const std::string& key, std::uint64_t fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    values_.erase(it);
    try {
      std::size_t pos = 0;
      std::uint64_t out = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return out;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + v + "'");
    }
  }

  Scalar take_real(const std::string& key, Scalar fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    values_.erase(it);
    try {
      std::size_t pos = 0;
      Scalar out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return out;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
  }

  template <typename T, typename F>
  std::vector<T> take_list(const std::string& key, const std::vector<T>& fallback, F convert) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    values_.erase(it);
    std::vector<T> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      try {
        out.push_back(convert(tok));
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad list element '" + tok + "'");
      }
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
  }

  void ensure_empty() const {
    if (values_.empty()) return;
    std::string msg = "unknown config keys:";
    for (const auto& [k, v] : values_) msg += " '" + k + "'";
    throw ConfigError(msg);
  }

private:
  std::map<std::string, std::string> values_;
};

std::string format_real(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides) {
  KeyPool pool;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("malformed section header at line " +
                                             std::to_string(lineno) + ": " + t);
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError("empty section name at line " + std::to_string(lineno));
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value' at line " + std::to_string(lineno) + ": " + t);
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key at line " + std::to_string(lineno));
    if (section.empty()) throw ConfigError("key outside any section at line " +
                                           std::to_string(lineno) + ": " + key);
    pool.put(section + "." + key, value, lineno);
  }

  for (const auto& ov : overrides) {
    std::size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must be section.key=value, got '" + ov + "'");
    std::string key = trim(ov.substr(0, eq));
    std::string value = trim(ov.substr(eq + 1));
    if (key.find('.') == std::string::npos)
      throw ConfigError("override key must be section.key, got '" + key + "'");
    // Overrides replace file values silently.
    (void)pool.take_string(key, "");
    pool.put(key, value, 0);
  }

  ExperimentConfig cfg;

  cfg.data_dir = pool.take_string("data.dir", "");
  cfg.raw_dir = pool.take_string("data.raw_dir", "");
  cfg.split_seed = pool.take_u64("data.split_seed", 42);
  cfg.stratified_split = pool.take_bool("data.stratified_split", false);
  cfg.window_lo = pool.take_real("data.window_lo", -1000.0);
  cfg.window_hi = pool.take_real("data.window_hi", 400.0);
  cfg.synth_nodules = static_cast<int>(pool.take_int("data.synth_nodules", 200));
  cfg.synth_readers = static_cast<int>(pool.take_int("data.synth_readers", 3));
  cfg.synth_seed = pool.take_u64("data.synth_seed", 7);

  auto& views = cfg.stage1.views;
  views.n_global = static_cast<int>(pool.take_int("views.n_global", 2));
  views.n_local = static_cast<int>(pool.take_int("views.n_local", 8));
  views.global_size = static_cast<int>(pool.take_int("views.global_size", 32));
  views.local_size = static_cast<int>(pool.take_int("views.local_size", 16));
  views.global_scale_lo = pool.take_real("views.global_scale_lo", 0.4);
  views.global_scale_hi = pool.take_real("views.global_scale_hi", 1.0);
  views.local_scale_lo = pool.take_real("views.local_scale_lo", 0.05);
  views.local_scale_hi = pool.take_real("views.local_scale_hi", 0.4);
  views.crop = pool.take_bool("views.crop", true);
  views.hflip = pool.take_bool("views.hflip", true);
  views.jitter = pool.take_bool("views.jitter", true);
  views.blur = pool.take_bool("views.blur", true);
  views.solarize = pool.take_bool("views.solarize", true);
  views.jitter_strength = pool.take_real("views.jitter_strength", 0.4);

  auto& enc = cfg.stage1.encoder;
  enc.kind = pool.take_string("encoder.kind", "vit");
  enc.depth = static_cast<int>(pool.take_int("encoder.depth", 12));
  enc.n_heads = static_cast<int>(pool.take_int("encoder.n_heads", 6));
  enc.embed_dim = static_cast<int>(pool.take_int("encoder.embed_dim", 384));
  enc.patch_size = static_cast<int>(pool.take_int("encoder.patch_size", 16));
  enc.input_size = static_cast<int>(pool.take_int("encoder.input_size", 32));
  enc.mlp_ratio = static_cast<int>(pool.take_int("encoder.mlp_ratio", 4));
  enc.cnn_width = static_cast<int>(pool.take_int("encoder.cnn_width", 32));

  auto& head = cfg.stage1.head;
  head.hidden_dim = static_cast<int>(pool.take_int("head.hidden_dim", 2048));
  head.bottleneck_dim = static_cast<int>(pool.take_int("head.bottleneck_dim", 256));
  head.output_dim = static_cast<int>(pool.take_int("head.output_dim", 65536));
  head.weight_norm_last = pool.take_bool("head.weight_norm_last", true);
  head.l2_normalize_bottleneck = pool.take_bool("head.l2_normalize_bottleneck", true);

  auto& sched = cfg.stage1.schedule;
  sched.epochs = static_cast<int>(pool.take_int("stage1.epochs", 300));
  sched.batch_size = static_cast<int>(pool.take_int("stage1.batch_size", 128));
  sched.warmup_epochs = static_cast<int>(pool.take_int("stage1.warmup_epochs", 10));
  sched.peak_lr = pool.take_real("stage1.peak_lr", 0.00025);
  sched.final_lr = pool.take_real("stage1.final_lr", 1e-6);
  sched.center_momentum = pool.take_real("stage1.center_momentum", 0.9);
  sched.momentum_start = pool.take_real("stage1.momentum_start", 0.996);
  sched.momentum_end = pool.take_real("stage1.momentum_end", 1.0);
  sched.weight_decay_start = pool.take_real("stage1.weight_decay_start", 0.04);
  sched.weight_decay_end = pool.take_real("stage1.weight_decay_end", 0.4);
  sched.freeze_last_layer_epochs =
      static_cast<int>(pool.take_int("stage1.freeze_last_layer_epochs", 0));
  cfg.stage1.temperatures.tau_teacher = pool.take_real("stage1.tau_teacher", 0.04);
  cfg.stage1.temperatures.tau_student = pool.take_real("stage1.tau_student", 0.1);
  cfg.stage1.centering = pool.take_bool("stage1.centering", true);
  cfg.stage1.seed = pool.take_u64("stage1.seed", 0);
  cfg.stage1.init_checkpoint = pool.take_string("stage1.init_checkpoint", "");
  cfg.stage1.checkpoint_every_epochs =
      static_cast<int>(pool.take_int("stage1.checkpoint_every_epochs", 0));

  auto& s2 = cfg.stage2;
  s2.epochs = static_cast<int>(pool.take_int("stage2.epochs", 100));
  s2.batch_size = static_cast<int>(pool.take_int("stage2.batch_size", 128));
  s2.sgd_momentum = pool.take_real("stage2.sgd_momentum", 0.9);
  s2.lr_full = pool.take_real("stage2.lr_full", 0.0005);
  s2.lr_partial = pool.take_real("stage2.lr_partial", 0.00025);
  s2.lr_override = pool.take_real("stage2.lr_override", 0.0);
  s2.augment = pool.take_bool("stage2.augment", true);
  s2.augmentation.hflip = pool.take_bool("stage2.aug_hflip", true);
  s2.augmentation.max_rotation_deg = pool.take_real("stage2.aug_max_rotation_deg", 10.0);
  s2.augmentation.max_translate_px =
      static_cast<int>(pool.take_int("stage2.aug_max_translate_px", 2));
  std::string source = pool.take_string("stage2.source", "concat_last_4");
  try {
    s2.source = model::feature_source_from_string(source);
  } catch (const InvalidInput&) {
    throw ConfigError("config key 'stage2.source': unknown feature source '" + source + "'");
  }
  s2.joint_malignancy_grad = pool.take_bool("stage2.joint_malignancy_grad", true);
  std::string policy = pool.take_string("stage2.excluded_policy", "drop");
  if (policy == "drop")
    s2.excluded_policy = probe::ExcludedPolicy::drop;
  else if (policy == "attributes_only")
    s2.excluded_policy = probe::ExcludedPolicy::attributes_only;
  else
    throw ConfigError("config key 'stage2.excluded_policy': expected drop or attributes_only");
  cfg.stage2_fraction = pool.take_real("stage2.fraction", 1.0);
  cfg.stage2_mask_seed = pool.take_u64("stage2.mask_seed", 0);
  cfg.stage2_seed = pool.take_u64("stage2.seed", 0);
  cfg.stage2_checkpoint = pool.take_string("stage2.checkpoint", "");
  cfg.stage2_strategy = pool.take_string("stage2.strategy", "two_stage");
  if (cfg.stage2_strategy != "two_stage" && cfg.stage2_strategy != "end_to_end")
    throw ConfigError("config key 'stage2.strategy': expected two_stage or end_to_end");

  auto& e2e = cfg.e2e;
  e2e.encoder = enc;  // shares the [encoder] section
  e2e.epochs = static_cast<int>(pool.take_int("e2e.epochs", 40));
  e2e.batch_size = static_cast<int>(pool.take_int("e2e.batch_size", 128));
  e2e.peak_lr = pool.take_real("e2e.peak_lr", 3e-4);
  e2e.warmup_epochs = static_cast<int>(pool.take_int("e2e.warmup_epochs", 2));
  e2e.weight_decay = pool.take_real("e2e.weight_decay", 0.01);
  e2e.augment = s2.augment;
  e2e.augmentation = s2.augmentation;
  e2e.excluded_policy = s2.excluded_policy;
  e2e.init_checkpoint = pool.take_string("e2e.init_checkpoint", "");

  auto& ev = cfg.eval_options;
  ev.mode = pool.take_string("eval.mode", "knn");
  if (ev.mode != "knn" && ev.mode != "trained")
    throw ConfigError("config key 'eval.mode': expected knn or trained");
  ev.k = static_cast<int>(pool.take_int("eval.k", 50));
  ev.weighted_knn = pool.take_bool("eval.weighted_knn", true);
  std::string knn_source = pool.take_string("eval.knn_source", "final_token");
  try {
    ev.knn_source = model::feature_source_from_string(knn_source);
  } catch (const InvalidInput&) {
    throw ConfigError("config key 'eval.knn_source': unknown feature source '" + knn_source + "'");
  }
  cfg.eval_checkpoint = pool.take_string("eval.checkpoint", "");
  cfg.eval_probe_checkpoint = pool.take_string("eval.probe_checkpoint", "");

  cfg.sweep_fractions = pool.take_list<Scalar>("sweep.fractions", cfg.sweep_fractions,
                                               [](const std::string& s) { return std::stod(s); });
  cfg.sweep_seeds = pool.take_list<std::uint64_t>(
      "sweep.seeds", cfg.sweep_seeds, [](const std::string& s) { return std::stoull(s); });
  cfg.sweep_with_baseline = pool.take_bool("sweep.with_baseline", false);

  const char* env_root = std::getenv("NODEX_OUTPUT_ROOT");
  cfg.output_root = pool.take_string("output.root", env_root ? env_root : "runs");

  pool.ensure_empty();

  // Cross-field validation with field-level messages.
  try {
    cfg.stage1.views.validate();
    cfg.stage1.encoder.validate();
    cfg.stage1.head.validate();
    cfg.stage1.temperatures.validate();
    cfg.stage1.schedule.validate();
    if (cfg.stage2_fraction <= 0 || cfg.stage2_fraction > 1)
      throw InvalidInput("stage2.fraction must be in (0,1]");
    if (cfg.window_hi <= cfg.window_lo) throw InvalidInput("data.window_hi must exceed window_lo");
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f.good()) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), overrides);
}

std::string ExperimentConfig::resolved_text() const {
  std::map<std::string, std::string> kv;
  kv["data.dir"] = data_dir;
  kv["data.raw_dir"] = raw_dir;
  kv["data.split_seed"] = std::to_string(split_seed);
  kv["data.stratified_split"] = stratified_split ? "true" : "false";
  kv["data.window_lo"] = format_real(window_lo);
  kv["data.window_hi"] = format_real(window_hi);
  kv["data.synth_nodules"] = std::to_string(synth_nodules);
  kv["data.synth_readers"] = std::to_string(synth_readers);
  kv["data.synth_seed"] = std::to_string(synth_seed);

  const auto& v = stage1.views;
  kv["views.n_global"] = std::to_string(v.n_global);
  kv["views.n_local"] = std::to_string(v.n_local);
  kv["views.global_size"] = std::to_string(v.global_size);
  kv["views.local_size"] = std::to_string(v.local_size);
  kv["views.global_scale_lo"] = format_real(v.global_scale_lo);
  kv["views.global_scale_hi"] = format_real(v.global_scale_hi);
  kv["views.local_scale_lo"] = format_real(v.local_scale_lo);
  kv["views.local_scale_hi"] = format_real(v.local_scale_hi);
  kv["views.crop"] = v.crop ? "true" : "false";
  kv["views.hflip"] = v.hflip ? "true" : "false";
  kv["views.jitter"] = v.jitter ? "true" : "false";
  kv["views.blur"] = v.blur ? "true" : "false";
  kv["views.solarize"] = v.solarize ? "true" : "false";
  kv["views.jitter_strength"] = format_real(v.jitter_strength);

  const auto& e = stage1.encoder;
  kv["encoder.kind"] = e.kind;
  kv["encoder.depth"] = std::to_string(e.depth);
  kv["encoder.n_heads"] = std::to_string(e.n_heads);
  kv["encoder.embed_dim"] = std::to_string(e.embed_dim);
  kv["encoder.patch_size"] = std::to_string(e.patch_size);
  kv["encoder.input_size"] = std::to_string(e.input_size);
  kv["encoder.mlp_ratio"] = std::to_string(e.mlp_ratio);
  kv["encoder.cnn_width"] = std::to_string(e.cnn_width);

  const auto& h = stage1.head;
  kv["head.hidden_dim"] = std::to_string(h.hidden_dim);
  kv["head.bottleneck_dim"] = std::to_string(h.bottleneck_dim);
  kv["head.output_dim"] = std::to_string(h.output_dim);
  kv["head.weight_norm_last"] = h.weight_norm_last ? "true" : "false";
  kv["head.l2_normalize_bottleneck"] = h.l2_normalize_bottleneck ? "true" : "false";

  const auto& s = stage1.schedule;
  kv["stage1.epochs"] = std::to_string(s.epochs);
  kv["stage1.batch_size"] = std::to_string(s.batch_size);
  kv["stage1.warmup_epochs"] = std::to_string(s.warmup_epochs);
  kv["stage1.peak_lr"] = format_real(s.peak_lr);
  kv["stage1.final_lr"] = format_real(s.final_lr);
  kv["stage1.center_momentum"] = format_real(s.center_momentum);
  kv["stage1.momentum_start"] = format_real(s.momentum_start);
  kv["stage1.momentum_end"] = format_real(s.momentum_end);
  kv["stage1.weight_decay_start"] = format_real(s.weight_decay_start);
  kv["stage1.weight_decay_end"] = format_real(s.weight_decay_end);
  kv["stage1.freeze_last_layer_epochs"] = std::to_string(s.freeze_last_layer_epochs);
  kv["stage1.tau_teacher"] = format_real(stage1.temperatures.tau_teacher);
  kv["stage1.tau_student"] = format_real(stage1.temperatures.tau_student);
  kv["stage1.centering"] = stage1.centering ? "true" : "false";
  kv["stage1.seed"] = std::to_string(stage1.seed);
  kv["stage1.init_checkpoint"] = stage1.init_checkpoint;
  kv["stage1.checkpoint_every_epochs"] = std::to_string(stage1.checkpoint_every_epochs);

  kv["stage2.epochs"] = std::to_string(stage2.epochs);
  kv["stage2.batch_size"] = std::to_string(stage2.batch_size);
  kv["stage2.sgd_momentum"] = format_real(stage2.sgd_momentum);
  kv["stage2.lr_full"] = format_real(stage2.lr_full);
  kv["stage2.lr_partial"] = format_real(stage2.lr_partial);
  kv["stage2.lr_override"] = format_real(stage2.lr_override);
  kv["stage2.augment"] = stage2.augment ? "true" : "false";
  kv["stage2.aug_hflip"] = stage2.augmentation.hflip ? "true" : "false";
  kv["stage2.aug_max_rotation_deg"] = format_real(stage2.augmentation.max_rotation_deg);
  kv["stage2.aug_max_translate_px"] = std::to_string(stage2.augmentation.max_translate_px);
  kv["stage2.source"] = model::to_string(stage2.source);
  kv["stage2.joint_malignancy_grad"] = stage2.joint_malignancy_grad ? "true" : "false";
  kv["stage2.excluded_policy"] =
      stage2.excluded_policy == probe::ExcludedPolicy::drop ? "drop" : "attributes_only";
  kv["stage2.fraction"] = format_real(stage2_fraction);
  kv["stage2.mask_seed"] = std::to_string(stage2_mask_seed);
  kv["stage2.seed"] = std::to_string(stage2_seed);
  kv["stage2.checkpoint"] = stage2_checkpoint;
  kv["stage2.strategy"] = stage2_strategy;

  kv["e2e.epochs"] = std::to_string(e2e.epochs);
  kv["e2e.batch_size"] = std::to_string(e2e.batch_size);
  kv["e2e.peak_lr"] = format_real(e2e.peak_lr);
  kv["e2e.warmup_epochs"] = std::to_string(e2e.warmup_epochs);
  kv["e2e.weight_decay"] = format_real(e2e.weight_decay);
  kv["e2e.init_checkpoint"] = e2e.init_checkpoint;

  kv["eval.mode"] = eval_options.mode;
  kv["eval.k"] = std::to_string(eval_options.k);
  kv["eval.weighted_knn"] = eval_options.weighted_knn ? "true" : "false";
  kv["eval.knn_source"] = model::to_string(eval_options.knn_source);
  kv["eval.checkpoint"] = eval_checkpoint;
  kv["eval.probe_checkpoint"] = eval_probe_checkpoint;

  std::string fractions;
  for (Scalar f : sweep_fractions) fractions += (fractions.empty() ? "" : ",") + format_real(f);
  kv["sweep.fractions"] = fractions;
  std::string seeds;
  for (std::uint64_t sd : sweep_seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(sd);
  kv["sweep.seeds"] = seeds;
  kv["sweep.with_baseline"] = sweep_with_baseline ? "true" : "false";

  kv["output.root"] = output_root;

  std::string section;
  std::string out;
  for (const auto& [key, value] : kv) {
    std::string sec = key.substr(0, key.find('.'));
    if (sec != section) {
      if (!out.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += key.substr(key.find('.') + 1) + " = " + value + "\n";
  }
  return out;
}

std::string ExperimentConfig::run_id() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(resolved_text())));
  return buf;
}

}  // namespace nodex
