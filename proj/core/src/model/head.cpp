#include "nodex/model/head.hpp"

namespace nodex::model {

void ProjectionHeadConfig::validate() const {
  NODEX_CHECK(hidden_dim >= 1 && bottleneck_dim >= 1, "head: dims must be positive");
  NODEX_CHECK(output_dim >= bottleneck_dim, "head: output dim must be >= bottleneck dim");
}

nlohmann::json ProjectionHeadConfig::to_json() const {
  return {{"hidden_dim", hidden_dim},
          {"bottleneck_dim", bottleneck_dim},
          {"output_dim", output_dim},
          {"weight_norm_last", weight_norm_last},
          {"l2_normalize_bottleneck", l2_normalize_bottleneck}};
}

ProjectionHeadConfig ProjectionHeadConfig::from_json(const nlohmann::json& j) {
  ProjectionHeadConfig c;
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.bottleneck_dim = j.at("bottleneck_dim").get<int>();
  c.output_dim = j.at("output_dim").get<int>();
  c.weight_norm_last = j.at("weight_norm_last").get<bool>();
  c.l2_normalize_bottleneck = j.at("l2_normalize_bottleneck").get<bool>();
  return c;
}

ProjectionHead::ProjectionHead(const ProjectionHeadConfig& cfg, Eigen::Index in_dim,
                               nn::ParamStore& store, Rng& rng)
    : cfg_(cfg),
      fc1_(store, "head.fc1", in_dim, cfg.hidden_dim, rng),
      fc2_(store, "head.fc2", cfg.hidden_dim, cfg.hidden_dim, rng),
      fc3_(store, "head.fc3", cfg.hidden_dim, cfg.bottleneck_dim, rng),
      last_(store, "head.last", cfg.bottleneck_dim, cfg.output_dim, rng,
            /*train_gain=*/!cfg.weight_norm_last) {
  cfg_.validate();
}

Matrix ProjectionHead::forward(const Matrix& features) {
  Matrix h = fc3_.forward(act2_.forward(fc2_.forward(act1_.forward(fc1_.forward(features)))));
  bottleneck_ = cfg_.l2_normalize_bottleneck ? l2_.forward(h) : h;
  return last_.forward(bottleneck_);
}

Matrix ProjectionHead::backward(const Matrix& dlogits) {
  Matrix db = last_.backward(dlogits);
  if (cfg_.l2_normalize_bottleneck) db = l2_.backward(db);
  return fc1_.backward(act1_.backward(fc2_.backward(act2_.backward(fc3_.backward(db)))));
}

}  // namespace nodex::model
