#include <cmath>

#include "nodex/model/encoder.hpp"

namespace nodex::model {

std::string to_string(FeatureSource s) {
  return s == FeatureSource::final_token ? "final_token" : "concat_last_4";
}

FeatureSource feature_source_from_string(const std::string& s) {
  if (s == "final_token") return FeatureSource::final_token;
  if (s == "concat_last_4") return FeatureSource::concat_last_4;
  throw InvalidInput("unknown feature source: " + s);
}

void EncoderConfig::validate() const {
  NODEX_CHECK(kind == "vit" || kind == "cnn", "encoder kind must be vit or cnn");
  if (kind == "vit") {
    NODEX_CHECK(depth >= 1, "vit: depth must be positive");
    NODEX_CHECK(embed_dim % n_heads == 0, "vit: embed_dim must be divisible by n_heads");
    NODEX_CHECK(input_size % patch_size == 0, "vit: input_size must be a patch multiple");
  } else {
    NODEX_CHECK(cnn_width >= 4, "cnn: width too small");
  }
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"kind", kind},           {"depth", depth},
          {"n_heads", n_heads},     {"embed_dim", embed_dim},
          {"patch_size", patch_size}, {"input_size", input_size},
          {"mlp_ratio", mlp_ratio}, {"cnn_width", cnn_width}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.kind = j.at("kind").get<std::string>();
  c.depth = j.at("depth").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.input_size = j.at("input_size").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.cnn_width = j.at("cnn_width").get<int>();
  return c;
}

namespace {

class VitEncoder final : public Encoder {
public:
  VitEncoder(const EncoderConfig& cfg, nn::ParamStore& store, Rng& rng)
      : cfg_(cfg),
        patch_embed_(store, "encoder.patch_embed", cfg.patch_size * cfg.patch_size,
                     cfg.embed_dim, rng),
        norm_(store, "encoder.norm", cfg.embed_dim) {
    base_grid_ = cfg.input_size / cfg.patch_size;
    cls_ = &store.bind("encoder.cls", 1, cfg.embed_dim);
    pos_ = &store.bind("encoder.pos", 1 + base_grid_ * base_grid_, cfg.embed_dim);
    if (cls_->value.isZero(0)) nn::init_trunc_normal(*cls_, rng, 0.02);
    if (pos_->value.isZero(0)) nn::init_trunc_normal(*pos_, rng, 0.02);
    blocks_.reserve(static_cast<std::size_t>(cfg.depth));
    for (int b = 0; b < cfg.depth; ++b)
      blocks_.emplace_back(store, "encoder.blocks." + std::to_string(b), cfg.embed_dim,
                           cfg.n_heads, cfg.embed_dim * cfg.mlp_ratio, rng);
  }

  Eigen::Index feature_dim(FeatureSource source) const override {
    return source == FeatureSource::final_token ? cfg_.embed_dim : 4 * cfg_.embed_dim;
  }

  Matrix forward(const Matrix& patches, int height, int width, FeatureSource source) override {
    NODEX_CHECK(height % cfg_.patch_size == 0 && width % cfg_.patch_size == 0,
                "vit: input size not a multiple of patch size");
    NODEX_CHECK(patches.cols() == static_cast<Eigen::Index>(height) * width,
                "vit: pixel count mismatch");
    NODEX_CHECK(source == FeatureSource::final_token || cfg_.depth >= 4,
                "vit: concat_last_4 needs depth >= 4");
    n_ = patches.rows();
    grid_ = height / cfg_.patch_size;
    tokens_ = 1 + grid_ * grid_;
    source_ = source;

    Matrix tok = patchify(patches, height, width);
    Matrix emb = patch_embed_.forward(tok);  // [n*g^2, D]

    Matrix x(n_ * tokens_, cfg_.embed_dim);
    Matrix pos = interpolated_pos();
    for (Eigen::Index s = 0; s < n_; ++s) {
      x.row(s * tokens_) = cls_->value.row(0) + pos.row(0);
      for (Eigen::Index t = 0; t < grid_ * grid_; ++t)
        x.row(s * tokens_ + 1 + t) = emb.row(s * grid_ * grid_ + t) + pos.row(1 + t);
    }

    if (source == FeatureSource::final_token) {
      for (auto& block : blocks_) x = block.forward(x, n_, tokens_);
      Matrix normed = norm_.forward(x);
      Matrix feat(n_, cfg_.embed_dim);
      for (Eigen::Index s = 0; s < n_; ++s) feat.row(s) = normed.row(s * tokens_);
      return feat;
    }

    // concat_last_4: normed class token of each of the last 4 blocks,
    // earliest first. Inference-only readout.
    Matrix feat(n_, 4 * cfg_.embed_dim);
    int first_tap = cfg_.depth - 4;
    int slot = 0;
    for (int b = 0; b < cfg_.depth; ++b) {
      x = blocks_[static_cast<std::size_t>(b)].forward(x, n_, tokens_);
      if (b >= first_tap) {
        Matrix normed = norm_.forward(x);
        for (Eigen::Index s = 0; s < n_; ++s)
          feat.block(s, slot * cfg_.embed_dim, 1, cfg_.embed_dim) = normed.row(s * tokens_);
        ++slot;
      }
    }
    return feat;
  }

  void backward(const Matrix& dfeatures) override {
    NODEX_REQUIRE(source_ == FeatureSource::final_token,
                  "vit: concat_last_4 readout has no backward path");
    NODEX_REQUIRE(dfeatures.rows() == n_, "vit: gradient batch mismatch");
    Matrix dnormed = Matrix::Zero(n_ * tokens_, cfg_.embed_dim);
    for (Eigen::Index s = 0; s < n_; ++s) dnormed.row(s * tokens_) = dfeatures.row(s);
    Matrix dx = norm_.backward(dnormed);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) dx = it->backward(dx);

    // Split token gradients back into cls/pos/patch embeddings.
    Matrix demb(n_ * grid_ * grid_, cfg_.embed_dim);
    Matrix dpos = Matrix::Zero(tokens_, cfg_.embed_dim);
    Matrix dcls = Matrix::Zero(1, cfg_.embed_dim);
    for (Eigen::Index s = 0; s < n_; ++s) {
      dcls.row(0) += dx.row(s * tokens_);
      dpos.row(0) += dx.row(s * tokens_);
      for (Eigen::Index t = 0; t < grid_ * grid_; ++t) {
        demb.row(s * grid_ * grid_ + t) = dx.row(s * tokens_ + 1 + t);
        dpos.row(1 + t) += dx.row(s * tokens_ + 1 + t);
      }
    }
    cls_->accumulate(dcls);
    accumulate_pos_grad(dpos);
    patch_embed_.backward(demb);
  }

private:
  Matrix patchify(const Matrix& patches, int height, int width) const {
    const int p = cfg_.patch_size;
    const Eigen::Index g = grid_;
    Matrix tok(n_ * g * g, p * p);
    for (Eigen::Index s = 0; s < n_; ++s) {
      for (Eigen::Index gy = 0; gy < g; ++gy) {
        for (Eigen::Index gx = 0; gx < g; ++gx) {
          Eigen::Index row = s * g * g + gy * g + gx;
          for (int py = 0; py < p; ++py)
            for (int px = 0; px < p; ++px)
              tok(row, py * p + px) =
                  patches(s, (gy * p + py) * width + gx * p + px);
        }
      }
    }
    (void)height;
    return tok;
  }

  struct PosWeight {
    Eigen::Index src;
    Scalar w;
  };

  /// Bilinear resize of the positional grid from base_grid_ to grid_.
  /// The class-token row passes through unchanged.
  Matrix interpolated_pos() {
    pos_weights_.clear();
    Matrix pos(tokens_, cfg_.embed_dim);
    pos.row(0) = pos_->value.row(0);
    if (grid_ == base_grid_) {
      for (Eigen::Index t = 0; t < grid_ * grid_; ++t) pos.row(1 + t) = pos_->value.row(1 + t);
      return pos;
    }
    pos_weights_.resize(static_cast<std::size_t>(grid_ * grid_));
    Scalar scale = static_cast<Scalar>(base_grid_) / static_cast<Scalar>(grid_);
    for (Eigen::Index oy = 0; oy < grid_; ++oy) {
      Scalar fy = (static_cast<Scalar>(oy) + 0.5) * scale - 0.5;
      fy = std::min(std::max(fy, 0.0), static_cast<Scalar>(base_grid_ - 1));
      Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(fy));
      Eigen::Index y1 = std::min(y0 + 1, static_cast<Eigen::Index>(base_grid_ - 1));
      Scalar wy = fy - static_cast<Scalar>(y0);
      for (Eigen::Index ox = 0; ox < grid_; ++ox) {
        Scalar fx = (static_cast<Scalar>(ox) + 0.5) * scale - 0.5;
        fx = std::min(std::max(fx, 0.0), static_cast<Scalar>(base_grid_ - 1));
        Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(fx));
        Eigen::Index x1 = std::min(x0 + 1, static_cast<Eigen::Index>(base_grid_ - 1));
        Scalar wx = fx - static_cast<Scalar>(x0);
        auto& cell = pos_weights_[static_cast<std::size_t>(oy * grid_ + ox)];
        cell = std::array<PosWeight, 4>{{{1 + y0 * base_grid_ + x0, (1 - wy) * (1 - wx)},
                                         {1 + y0 * base_grid_ + x1, (1 - wy) * wx},
                                         {1 + y1 * base_grid_ + x0, wy * (1 - wx)},
                                         {1 + y1 * base_grid_ + x1, wy * wx}}};
        Vector row = Vector::Zero(cfg_.embed_dim);
        for (const auto& pw : cell) row += pw.w * pos_->value.row(pw.src).transpose();
        pos.row(1 + oy * grid_ + ox) = row.transpose();
      }
    }
    return pos;
  }

  void accumulate_pos_grad(const Matrix& dpos) {
    Matrix g = Matrix::Zero(pos_->value.rows(), pos_->value.cols());
    g.row(0) = dpos.row(0);
    if (grid_ == base_grid_) {
      for (Eigen::Index t = 0; t < grid_ * grid_; ++t) g.row(1 + t) = dpos.row(1 + t);
    } else {
      for (Eigen::Index t = 0; t < grid_ * grid_; ++t)
        for (const auto& pw : pos_weights_[static_cast<std::size_t>(t)])
          g.row(pw.src) += pw.w * dpos.row(1 + t);
    }
    pos_->accumulate(g);
  }

  EncoderConfig cfg_;
  nn::Linear patch_embed_;
  nn::LayerNorm norm_;
  nn::Parameter* cls_ = nullptr;
  nn::Parameter* pos_ = nullptr;
  std::vector<nn::TransformerBlock> blocks_;
  Eigen::Index base_grid_ = 0;

  Eigen::Index n_ = 0, grid_ = 0, tokens_ = 0;
  FeatureSource source_ = FeatureSource::final_token;
  std::vector<std::array<PosWeight, 4>> pos_weights_;
};

}  // namespace

std::unique_ptr<Encoder> make_vit_encoder(const EncoderConfig& cfg, nn::ParamStore& store,
                                          Rng& rng) {
  return std::make_unique<VitEncoder>(cfg, store, rng);
}

}  // namespace nodex::model
