#include "nodex/model/encoder.hpp"

namespace nodex::model {

namespace {

/// Norm-free residual block: x + conv2(gelu(conv1(x))), conv2 zero-initialised
/// so the block starts as the identity.
struct ResBlock {
  ResBlock(nn::ParamStore& store, const std::string& prefix, int channels, Rng& rng)
      : conv1(store, prefix + ".conv1", channels, channels, 3, 1, 1, rng),
        conv2(store, prefix + ".conv2", channels, channels, 3, 1, 1, rng, /*zero_init=*/true),
        channels_(channels) {}

  Matrix forward(const Matrix& x, Eigen::Index n, int h, int w) {
    return x + conv2.forward(act.forward(conv1.forward(x, n, h, w)), n, h, w);
  }
  Matrix backward(const Matrix& dy) {
    return dy + conv1.backward(act.backward(conv2.backward(dy)));
  }

  nn::Conv2d conv1, conv2;
  nn::Gelu act;
  int channels_;
};

/// Stage entry: stride-2 3x3 conv paired with a stride-2 1x1 skip projection.
struct Downsample {
  Downsample(nn::ParamStore& store, const std::string& prefix, int in_ch, int out_ch, Rng& rng)
      : conv(store, prefix + ".conv", in_ch, out_ch, 3, 2, 1, rng),
        skip(store, prefix + ".skip", in_ch, out_ch, 1, 2, 0, rng) {}

  Matrix forward(const Matrix& x, Eigen::Index n, int h, int w) {
    Matrix main = act.forward(conv.forward(x, n, h, w));
    return main + skip.forward(x, n, h, w);
  }
  Matrix backward(const Matrix& dy) {
    return conv.backward(act.backward(dy)) + skip.backward(dy);
  }

  nn::Conv2d conv, skip;
  nn::Gelu act;
};

class CnnEncoder final : public Encoder {
public:
  CnnEncoder(const EncoderConfig& cfg, nn::ParamStore& store, Rng& rng)
      : cfg_(cfg),
        stem_(store, "encoder.stem", 1, cfg.cnn_width, 3, 1, 1, rng),
        down1_(store, "encoder.down1", cfg.cnn_width, 2 * cfg.cnn_width, rng),
        down2_(store, "encoder.down2", 2 * cfg.cnn_width, 4 * cfg.cnn_width, rng) {
    int w = cfg.cnn_width;
    for (int b = 0; b < 2; ++b)
      stage1_.emplace_back(store, "encoder.stage1." + std::to_string(b), w, rng);
    for (int b = 0; b < 2; ++b)
      stage2_.emplace_back(store, "encoder.stage2." + std::to_string(b), 2 * w, rng);
    for (int b = 0; b < 4; ++b)
      stage3_.emplace_back(store, "encoder.stage3." + std::to_string(b), 4 * w, rng);
  }

  Eigen::Index feature_dim(FeatureSource source) const override {
    return source == FeatureSource::final_token ? 4 * cfg_.cnn_width : 16 * cfg_.cnn_width;
  }

  Matrix forward(const Matrix& patches, int height, int width, FeatureSource source) override {
    NODEX_CHECK(height >= 8 && width >= 8, "cnn: input too small");
    n_ = patches.rows();
    source_ = source;
    h_ = height;
    w_ = width;

    Matrix x = act_.forward(stem_.forward(patches, n_, height, width));
    for (auto& b : stage1_) x = b.forward(x, n_, height, width);
    x = down1_.forward(x, n_, height, width);
    int h2 = down1_.conv.out_height(height), w2 = down1_.conv.out_width(width);
    for (auto& b : stage2_) x = b.forward(x, n_, h2, w2);
    x = down2_.forward(x, n_, h2, w2);
    h3_ = down2_.conv.out_height(h2);
    w3_ = down2_.conv.out_width(w2);

    if (source == FeatureSource::final_token) {
      for (auto& b : stage3_) x = b.forward(x, n_, h3_, w3_);
      return pool_.forward(x, n_, 4 * cfg_.cnn_width);
    }

    // concat_last_4: pooled output of each final-stage block. Inference only.
    Matrix feat(n_, 16 * cfg_.cnn_width);
    for (std::size_t b = 0; b < stage3_.size(); ++b) {
      x = stage3_[b].forward(x, n_, h3_, w3_);
      nn::GlobalAvgPool pool;
      feat.middleCols(static_cast<Eigen::Index>(b) * 4 * cfg_.cnn_width, 4 * cfg_.cnn_width) =
          pool.forward(x, n_, 4 * cfg_.cnn_width);
    }
    return feat;
  }

  void backward(const Matrix& dfeatures) override {
    NODEX_REQUIRE(source_ == FeatureSource::final_token,
                  "cnn: concat_last_4 readout has no backward path");
    Matrix dx = pool_.backward(dfeatures);
    for (auto it = stage3_.rbegin(); it != stage3_.rend(); ++it) dx = it->backward(dx);
    dx = down2_.backward(dx);
    for (auto it = stage2_.rbegin(); it != stage2_.rend(); ++it) dx = it->backward(dx);
    dx = down1_.backward(dx);
    for (auto it = stage1_.rbegin(); it != stage1_.rend(); ++it) dx = it->backward(dx);
    stem_.backward(act_.backward(dx));
  }

private:
  EncoderConfig cfg_;
  nn::Conv2d stem_;
  nn::Gelu act_;
  std::vector<ResBlock> stage1_;
  Downsample down1_;
  std::vector<ResBlock> stage2_;
  Downsample down2_;
  std::vector<ResBlock> stage3_;
  nn::GlobalAvgPool pool_;

  Eigen::Index n_ = 0;
  int h_ = 0, w_ = 0, h3_ = 0, w3_ = 0;
  FeatureSource source_ = FeatureSource::final_token;
};

}  // namespace

std::unique_ptr<Encoder> make_vit_encoder(const EncoderConfig&, nn::ParamStore&, Rng&);

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, nn::ParamStore& store,
                                      Rng& rng) {
  config.validate();
  if (config.kind == "cnn") return std::make_unique<CnnEncoder>(config, store, rng);
  return make_vit_encoder(config, store, rng);
}

std::size_t encoder_parameter_count(const EncoderConfig& config) {
  nn::ParamStore store(false);
  Rng rng(1);
  make_encoder(config, store, rng);
  return store.total_size();
}

}  // namespace nodex::model
