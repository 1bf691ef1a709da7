#include "nodex/augment/augment.hpp"

#include <cmath>

namespace nodex::augment {

using nlohmann::json;

json log_to_json(const TransformLog& log) {
  json arr = json::array();
  for (const auto& step : log) {
    json s;
    s["name"] = step.name;
    for (const auto& [k, v] : step.params) s[k] = v;
    arr.push_back(std::move(s));
  }
  return arr;
}

TransformLog log_from_json(const json& j) {
  TransformLog log;
  for (const auto& s : j) {
    TransformStep step;
    step.name = s.at("name").get<std::string>();
    for (auto it = s.begin(); it != s.end(); ++it)
      if (it.key() != "name") step.params[it.key()] = it.value().get<Scalar>();
    log.push_back(std::move(step));
  }
  return log;
}

void ViewConfig::validate() const {
  NODEX_CHECK(n_global >= 2, "views: need at least 2 global views");
  NODEX_CHECK(n_local >= 0, "views: n_local must be non-negative");
  NODEX_CHECK(global_scale_lo > 0 && global_scale_hi <= 1.0 &&
                  global_scale_lo <= global_scale_hi,
              "views: global crop scale must be an interval in (0,1]");
  NODEX_CHECK(local_scale_lo > 0 && local_scale_hi <= 1.0 && local_scale_lo <= local_scale_hi,
              "views: local crop scale must be an interval in (0,1]");
  NODEX_CHECK(local_scale_hi <= global_scale_lo,
              "views: local scale upper bound must not exceed global scale lower bound");
  NODEX_CHECK(local_size <= global_size, "views: local views must be smaller than global");
}

json ViewConfig::to_json() const {
  return {{"n_global", n_global},
          {"n_local", n_local},
          {"global_size", global_size},
          {"local_size", local_size},
          {"global_scale_lo", global_scale_lo},
          {"global_scale_hi", global_scale_hi},
          {"local_scale_lo", local_scale_lo},
          {"local_scale_hi", local_scale_hi},
          {"crop", crop},
          {"hflip", hflip},
          {"jitter", jitter},
          {"blur", blur},
          {"solarize", solarize},
          {"jitter_strength", jitter_strength},
          {"seed", seed}};
}

ViewConfig ViewConfig::from_json(const json& j) {
  ViewConfig c;
  c.n_global = j.at("n_global").get<int>();
  c.n_local = j.at("n_local").get<int>();
  c.global_size = j.at("global_size").get<int>();
  c.local_size = j.at("local_size").get<int>();
  c.global_scale_lo = j.at("global_scale_lo").get<Scalar>();
  c.global_scale_hi = j.at("global_scale_hi").get<Scalar>();
  c.local_scale_lo = j.at("local_scale_lo").get<Scalar>();
  c.local_scale_hi = j.at("local_scale_hi").get<Scalar>();
  c.crop = j.at("crop").get<bool>();
  c.hflip = j.at("hflip").get<bool>();
  c.jitter = j.at("jitter").get<bool>();
  c.blur = j.at("blur").get<bool>();
  c.solarize = j.at("solarize").get<bool>();
  c.jitter_strength = j.at("jitter_strength").get<Scalar>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

Matrix resize_bilinear(const Matrix& src, int out_h, int out_w) {
  if (src.rows() == out_h && src.cols() == out_w) return src;
  Matrix out(out_h, out_w);
  Scalar sy = static_cast<Scalar>(src.rows()) / out_h;
  Scalar sx = static_cast<Scalar>(src.cols()) / out_w;
  for (int r = 0; r < out_h; ++r) {
    Scalar fy = (r + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), static_cast<Scalar>(src.rows() - 1));
    Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(fy));
    Eigen::Index y1 = std::min(y0 + 1, src.rows() - 1);
    Scalar wy = fy - y0;
    for (int c = 0; c < out_w; ++c) {
      Scalar fx = (c + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), static_cast<Scalar>(src.cols() - 1));
      Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(fx));
      Eigen::Index x1 = std::min(x0 + 1, src.cols() - 1);
      Scalar wx = fx - x0;
      out(r, c) = src(y0, x0) * (1 - wy) * (1 - wx) + src(y0, x1) * (1 - wy) * wx +
                  src(y1, x0) * wy * (1 - wx) + src(y1, x1) * wy * wx;
    }
  }
  return out;
}

Matrix gaussian_blur(const Matrix& src, Scalar sigma) {
  constexpr int radius = 2;  // 5-tap kernel, plenty at 32px
  std::array<Scalar, 2 * radius + 1> k;
  Scalar sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (auto& v : k) v /= sum;

  auto clampi = [](Eigen::Index v, Eigen::Index hi) { return std::min(std::max(v, Eigen::Index(0)), hi); };
  Matrix tmp(src.rows(), src.cols());
  for (Eigen::Index r = 0; r < src.rows(); ++r)
    for (Eigen::Index c = 0; c < src.cols(); ++c) {
      Scalar acc = 0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] * src(r, clampi(c + i, src.cols() - 1));
      tmp(r, c) = acc;
    }
  Matrix out(src.rows(), src.cols());
  for (Eigen::Index r = 0; r < src.rows(); ++r)
    for (Eigen::Index c = 0; c < src.cols(); ++c) {
      Scalar acc = 0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] * tmp(clampi(r + i, src.rows() - 1), c);
      out(r, c) = acc;
    }
  return out;
}

Matrix hflip(const Matrix& src) { return src.rowwise().reverse(); }

Matrix rotate_bilinear(const Matrix& src, Scalar degrees) {
  Scalar rad = degrees * M_PI / 180.0;
  Scalar cs = std::cos(rad), sn = std::sin(rad);
  Scalar cy = (src.rows() - 1) / 2.0, cx = (src.cols() - 1) / 2.0;
  Matrix out = Matrix::Zero(src.rows(), src.cols());
  for (Eigen::Index r = 0; r < src.rows(); ++r)
    for (Eigen::Index c = 0; c < src.cols(); ++c) {
      Scalar dy = r - cy, dx = c - cx;
      Scalar fy = cy + cs * dy - sn * dx;
      Scalar fx = cx + sn * dy + cs * dx;
      if (fy < 0 || fx < 0 || fy > src.rows() - 1 || fx > src.cols() - 1) continue;
      Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(fy));
      Eigen::Index y1 = std::min(y0 + 1, src.rows() - 1);
      Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(fx));
      Eigen::Index x1 = std::min(x0 + 1, src.cols() - 1);
      Scalar wy = fy - y0, wx = fx - x0;
      out(r, c) = src(y0, x0) * (1 - wy) * (1 - wx) + src(y0, x1) * (1 - wy) * wx +
                  src(y1, x0) * wy * (1 - wx) + src(y1, x1) * wy * wx;
    }
  return out;
}

namespace {

Matrix clamp01(Matrix m) {
  return m.unaryExpr([](Scalar v) { return std::min(1.0, std::max(0.0, v)); });
}

Matrix apply_step(const Matrix& patch, const TransformStep& step) {
  const auto& p = step.params;
  if (step.name == "crop") {
    int top = static_cast<int>(p.at("top")), left = static_cast<int>(p.at("left"));
    int h = static_cast<int>(p.at("h")), w = static_cast<int>(p.at("w"));
    int out = static_cast<int>(p.at("out"));
    return resize_bilinear(patch.block(top, left, h, w), out, out);
  }
  if (step.name == "resize") {
    int out = static_cast<int>(p.at("out"));
    return resize_bilinear(patch, out, out);
  }
  if (step.name == "hflip") return hflip(patch);
  if (step.name == "brightness") return clamp01(patch * p.at("factor"));
  if (step.name == "contrast") {
    Scalar mean = patch.mean();
    return clamp01(((patch.array() - mean) * p.at("factor") + mean).matrix());
  }
  if (step.name == "blur") return gaussian_blur(patch, p.at("sigma"));
  if (step.name == "solarize") {
    Scalar thr = p.at("threshold");
    return patch.unaryExpr([thr](Scalar v) { return v > thr ? 1.0 - v : v; });
  }
  throw InvalidInput("unknown transform step: " + step.name);
}

/// torchvision-style crop box: up to 10 attempts at area in scale range and
/// aspect in [3/4, 4/3], else a centred fallback.
void sample_crop_box(Rng& rng, Eigen::Index height, Eigen::Index width, Scalar scale_lo,
                     Scalar scale_hi, int& top, int& left, int& h, int& w) {
  const Scalar area = static_cast<Scalar>(height * width);
  for (int attempt = 0; attempt < 10; ++attempt) {
    Scalar target = area * rng.uniform(scale_lo, scale_hi);
    Scalar log_ratio = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
    Scalar ratio = std::exp(log_ratio);
    w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w > 0 && h > 0 && w <= width && h <= height) {
      top = static_cast<int>(rng.uniform_int(0, height - h));
      left = static_cast<int>(rng.uniform_int(0, width - w));
      return;
    }
  }
  h = static_cast<int>(std::min(height, width));
  w = h;
  top = static_cast<int>((height - h) / 2);
  left = static_cast<int>((width - w) / 2);
}

struct SlotRecipe {
  int out_size;
  Scalar scale_lo, scale_hi;
  Scalar blur_p;
  Scalar solarize_p;
};

TransformLog sample_view_log(const Matrix& patch, const ViewConfig& cfg,
                             const SlotRecipe& recipe, Rng& rng) {
  TransformLog log;
  if (cfg.crop) {
    int top, left, h, w;
    sample_crop_box(rng, patch.rows(), patch.cols(), recipe.scale_lo, recipe.scale_hi, top, left,
                    h, w);
    log.push_back({"crop",
                   {{"top", static_cast<Scalar>(top)},
                    {"left", static_cast<Scalar>(left)},
                    {"h", static_cast<Scalar>(h)},
                    {"w", static_cast<Scalar>(w)},
                    {"out", static_cast<Scalar>(recipe.out_size)}}});
  } else if (patch.rows() != recipe.out_size || patch.cols() != recipe.out_size) {
    log.push_back({"resize", {{"out", static_cast<Scalar>(recipe.out_size)}}});
  }
  if (cfg.hflip && rng.bernoulli(0.5)) log.push_back({"hflip", {}});
  if (cfg.jitter && rng.bernoulli(0.8)) {
    // Brightness/contrast in randomised order, BYOL-style strength.
    Scalar b = rng.uniform(1.0 - cfg.jitter_strength, 1.0 + cfg.jitter_strength);
    Scalar c = rng.uniform(1.0 - cfg.jitter_strength, 1.0 + cfg.jitter_strength);
    if (rng.bernoulli(0.5)) {
      log.push_back({"brightness", {{"factor", b}}});
      log.push_back({"contrast", {{"factor", c}}});
    } else {
      log.push_back({"contrast", {{"factor", c}}});
      log.push_back({"brightness", {{"factor", b}}});
    }
  }
  if (cfg.blur && rng.bernoulli(recipe.blur_p))
    log.push_back({"blur", {{"sigma", rng.uniform(0.1, 2.0)}}});
  if (cfg.solarize && rng.bernoulli(recipe.solarize_p))
    log.push_back({"solarize", {{"threshold", 0.5}}});
  return log;
}

}  // namespace

Matrix apply_transform_log(const Matrix& patch, const TransformLog& log) {
  Matrix out = patch;
  for (const auto& step : log) out = apply_step(out, step);
  return out;
}

ViewBatch make_views(const std::vector<Matrix>& patches, const ViewConfig& config) {
  config.validate();
  NODEX_CHECK(!patches.empty(), "make_views: empty batch");
  for (const auto& p : patches)
    NODEX_CHECK(p.rows() == patches[0].rows() && p.cols() == patches[0].cols(),
                "make_views: patches must share shape");
  NODEX_CHECK(patches[0].rows() >= config.global_size && patches[0].cols() >= config.global_size,
              "make_views: patch smaller than the global crop size");

  const Eigen::Index n = static_cast<Eigen::Index>(patches.size());
  const int n_views = config.n_global + config.n_local;

  ViewBatch batch;
  batch.provenance.resize(static_cast<std::size_t>(n_views));
  for (int slot = 0; slot < n_views; ++slot) {
    const bool global = slot < config.n_global;
    SlotRecipe recipe;
    recipe.out_size = global ? config.global_size : config.local_size;
    recipe.scale_lo = global ? config.global_scale_lo : config.local_scale_lo;
    recipe.scale_hi = global ? config.global_scale_hi : config.local_scale_hi;
    // DINO-style slot schedule: the first global view is always blurred, the
    // second rarely but sometimes solarised, locals in between.
    if (slot == 0) {
      recipe.blur_p = 1.0;
      recipe.solarize_p = 0.0;
    } else if (slot == 1) {
      recipe.blur_p = 0.1;
      recipe.solarize_p = 0.2;
    } else {
      recipe.blur_p = 0.5;
      recipe.solarize_p = 0.0;
    }

    Matrix views(n, static_cast<Eigen::Index>(recipe.out_size) * recipe.out_size);
    auto& logs = batch.provenance[static_cast<std::size_t>(slot)];
    logs.resize(static_cast<std::size_t>(n));
    for (Eigen::Index s = 0; s < n; ++s) {
      Rng rng(derive_seed(config.seed, "view", static_cast<std::uint64_t>(slot),
                          static_cast<std::uint64_t>(s)));
      TransformLog log = sample_view_log(patches[static_cast<std::size_t>(s)], config, recipe, rng);
      Matrix view = apply_transform_log(patches[static_cast<std::size_t>(s)], log);
      for (Eigen::Index r = 0; r < view.rows(); ++r)
        for (Eigen::Index c = 0; c < view.cols(); ++c) views(s, r * view.cols() + c) = view(r, c);
      logs[static_cast<std::size_t>(s)] = std::move(log);
    }
    if (global)
      batch.global_views.push_back(std::move(views));
    else
      batch.local_views.push_back(std::move(views));
  }
  return batch;
}

std::vector<Matrix> augment_probe(const std::vector<Matrix>& patches,
                                  const ProbeAugmentConfig& config, std::uint64_t seed) {
  std::vector<Matrix> out;
  out.reserve(patches.size());
  for (std::size_t s = 0; s < patches.size(); ++s) {
    if (!config.enabled) {
      out.push_back(patches[s]);
      continue;
    }
    Rng rng(derive_seed(seed, "probe-aug", s));
    Matrix p = patches[s];
    if (config.hflip && rng.bernoulli(0.5)) p = hflip(p);
    if (config.max_rotation_deg > 0)
      p = rotate_bilinear(p, rng.uniform(-config.max_rotation_deg, config.max_rotation_deg));
    if (config.max_translate_px > 0) {
      int dy = static_cast<int>(rng.uniform_int(-config.max_translate_px, config.max_translate_px));
      int dx = static_cast<int>(rng.uniform_int(-config.max_translate_px, config.max_translate_px));
      Matrix shifted = Matrix::Zero(p.rows(), p.cols());
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        Eigen::Index sr = r - dy;
        if (sr < 0 || sr >= p.rows()) continue;
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
          Eigen::Index sc = c - dx;
          if (sc < 0 || sc >= p.cols()) continue;
          shifted(r, c) = p(sr, sc);
        }
      }
      p = std::move(shifted);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace nodex::augment
