#include "nodex/nn/layers.hpp"

#include <cmath>

namespace nodex::nn {

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Scalar mx = logits.row(r).maxCoeff();
    ArrayX e = (logits.row(r).array() - mx).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(ParamStore& store, const std::string& prefix, Eigen::Index in, Eigen::Index out,
               Rng& rng, Scalar init_std, bool with_bias)
    : W_(&store.bind(prefix + ".weight", in, out)), b_(nullptr) {
  if (W_->value.isZero(0)) init_trunc_normal(*W_, rng, init_std);
  if (with_bias) b_ = &store.bind(prefix + ".bias", 1, out);
}

Matrix Linear::forward(const Matrix& x) {
  NODEX_CHECK(x.cols() == in_dim(), "Linear " + W_->name + ": input dim mismatch");
  x_ = x;
  Matrix y = x * W_->value;
  if (b_) y.rowwise() += b_->value.row(0);
  return y;
}

Matrix Linear::backward(const Matrix& dy) {
  NODEX_REQUIRE(x_.rows() == dy.rows(), "Linear " + W_->name + ": backward before forward");
  W_->accumulate(x_.transpose() * dy);
  if (b_) b_->accumulate(dy.colwise().sum());
  return dy * W_->value.transpose();
}

// ---------------------------------------------------------------- Gelu

Matrix Gelu::forward(const Matrix& x) {
  x_ = x;
  return x.unaryExpr([](Scalar v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); });
}

Matrix Gelu::backward(const Matrix& dy) {
  Matrix dx = x_.unaryExpr([](Scalar v) {
    Scalar cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
    Scalar pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
    return cdf + v * pdf;
  });
  return dx.cwiseProduct(dy);
}

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(ParamStore& store, const std::string& prefix, Eigen::Index dim, Scalar eps)
    : gamma_(&store.bind(prefix + ".gamma", 1, dim)),
      beta_(&store.bind(prefix + ".beta", 1, dim)),
      eps_(eps) {
  if (gamma_->value.isZero(0)) gamma_->value.setOnes();
}

Matrix LayerNorm::forward(const Matrix& x) {
  Eigen::Index n = x.rows(), d = x.cols();
  xhat_.resize(n, d);
  inv_std_.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    Scalar mean = x.row(r).mean();
    ArrayX centered = x.row(r).array() - mean;
    Scalar var = centered.square().mean();
    Scalar inv = 1.0 / std::sqrt(var + eps_);
    inv_std_(r) = inv;
    xhat_.row(r) = (centered * inv).matrix();
  }
  Matrix y = xhat_;
  y.array().rowwise() *= gamma_->value.row(0).array();
  y.rowwise() += beta_->value.row(0);
  return y;
}

Matrix LayerNorm::backward(const Matrix& dy) {
  Eigen::Index n = dy.rows(), d = dy.cols();
  gamma_->accumulate((dy.array() * xhat_.array()).colwise().sum().matrix());
  beta_->accumulate(dy.colwise().sum());
  Matrix dx(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    ArrayX dxhat = dy.row(r).array() * gamma_->value.row(0).array();
    Scalar m1 = dxhat.mean();
    Scalar m2 = (dxhat * xhat_.row(r).array()).mean();
    dx.row(r) = ((dxhat - m1 - xhat_.row(r).array() * m2) * inv_std_(r)).matrix();
  }
  return dx;
}

// ---------------------------------------------------------------- L2NormalizeRows

Matrix L2NormalizeRows::forward(const Matrix& x) {
  norms_.resize(x.rows());
  y_.resize(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Scalar n = std::max(x.row(r).norm(), eps_);
    norms_(r) = n;
    y_.row(r) = x.row(r) / n;
  }
  return y_;
}

Matrix L2NormalizeRows::backward(const Matrix& dy) {
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    Scalar dot = y_.row(r).dot(dy.row(r));
    dx.row(r) = (dy.row(r) - y_.row(r) * dot) / norms_(r);
  }
  return dx;
}

// ---------------------------------------------------------------- WeightNormLinear

WeightNormLinear::WeightNormLinear(ParamStore& store, const std::string& prefix, Eigen::Index in,
                                   Eigen::Index out, Rng& rng, bool train_gain)
    : v_(&store.bind(prefix + ".v", in, out)),
      g_(&store.bind(prefix + ".g", 1, out)),
      train_gain_(train_gain) {
  if (v_->value.isZero(0)) init_trunc_normal(*v_, rng, 0.02);
  if (g_->value.isZero(0)) g_->value.setOnes();
}

Matrix WeightNormLinear::effective_weight() const {
  Matrix w = v_->value;
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    Scalar n = std::max(w.col(c).norm(), 1e-12);
    w.col(c) *= g_->value(0, c) / n;
  }
  return w;
}

Matrix WeightNormLinear::forward(const Matrix& x) {
  x_ = x;
  norms_.resize(v_->value.cols());
  for (Eigen::Index c = 0; c < v_->value.cols(); ++c)
    norms_(c) = std::max(v_->value.col(c).norm(), 1e-12);
  w_eff_ = v_->value;
  for (Eigen::Index c = 0; c < w_eff_.cols(); ++c)
    w_eff_.col(c) *= g_->value(0, c) / norms_(c);
  return x * w_eff_;
}

Matrix WeightNormLinear::backward(const Matrix& dy) {
  Matrix dW = x_.transpose() * dy;  // gradient wrt the effective weight
  Matrix dx = dy * w_eff_.transpose();
  if (v_->trainable) {
    Matrix dv(v_->value.rows(), v_->value.cols());
    for (Eigen::Index c = 0; c < v_->value.cols(); ++c) {
      Vector u = v_->value.col(c) / norms_(c);
      Scalar along = u.dot(dW.col(c));
      dv.col(c) = (g_->value(0, c) / norms_(c)) * (dW.col(c) - along * u);
      if (train_gain_) g_->grad(0, c) += along;
    }
    v_->accumulate(dv);
  }
  return dx;
}

// ---------------------------------------------------------------- MultiHeadAttention

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& prefix,
                                       Eigen::Index dim, int n_heads, Rng& rng)
    : qkv_(store, prefix + ".qkv", dim, 3 * dim, rng),
      proj_(store, prefix + ".proj", dim, dim, rng),
      dim_(dim),
      n_heads_(n_heads) {
  NODEX_CHECK(dim % n_heads == 0, "attention: dim must be divisible by heads");
}

Matrix MultiHeadAttention::forward(const Matrix& x, Eigen::Index n_samples,
                                   Eigen::Index n_tokens) {
  NODEX_CHECK(x.rows() == n_samples * n_tokens, "attention: row count mismatch");
  n_samples_ = n_samples;
  n_tokens_ = n_tokens;
  qkv_out_ = qkv_.forward(x);
  const Eigen::Index dh = dim_ / n_heads_;
  const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(dh));

  attn_.assign(static_cast<std::size_t>(n_samples * n_heads_), Matrix());
  Matrix out(x.rows(), dim_);
  for (Eigen::Index n = 0; n < n_samples; ++n) {
    auto rows = qkv_out_.middleRows(n * n_tokens, n_tokens);
    for (int h = 0; h < n_heads_; ++h) {
      auto Q = rows.block(0, h * dh, n_tokens, dh);
      auto K = rows.block(0, dim_ + h * dh, n_tokens, dh);
      auto V = rows.block(0, 2 * dim_ + h * dh, n_tokens, dh);
      Matrix A = softmax_rows(Q * K.transpose() * scale);
      out.block(n * n_tokens, h * dh, n_tokens, dh) = A * V;
      attn_[static_cast<std::size_t>(n * n_heads_ + h)] = std::move(A);
    }
  }
  return proj_.forward(out);
}

Matrix MultiHeadAttention::backward(const Matrix& dy) {
  const Eigen::Index dh = dim_ / n_heads_;
  const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(dh));
  Matrix dO = proj_.backward(dy);

  Matrix dqkv = Matrix::Zero(qkv_out_.rows(), qkv_out_.cols());
  for (Eigen::Index n = 0; n < n_samples_; ++n) {
    auto rows = qkv_out_.middleRows(n * n_tokens_, n_tokens_);
    for (int h = 0; h < n_heads_; ++h) {
      auto Q = rows.block(0, h * dh, n_tokens_, dh);
      auto K = rows.block(0, dim_ + h * dh, n_tokens_, dh);
      auto V = rows.block(0, 2 * dim_ + h * dh, n_tokens_, dh);
      const Matrix& A = attn_[static_cast<std::size_t>(n * n_heads_ + h)];
      auto dOh = dO.block(n * n_tokens_, h * dh, n_tokens_, dh);

      Matrix dA = dOh * V.transpose();
      Matrix dV = A.transpose() * dOh;
      // softmax backward per row: dS = A * (dA - rowsum(dA .* A))
      Matrix dS(A.rows(), A.cols());
      for (Eigen::Index r = 0; r < A.rows(); ++r) {
        Scalar dot = A.row(r).dot(dA.row(r));
        dS.row(r) = (A.row(r).array() * (dA.row(r).array() - dot)).matrix();
      }
      dqkv.block(n * n_tokens_, h * dh, n_tokens_, dh) += dS * K * scale;
      dqkv.block(n * n_tokens_, dim_ + h * dh, n_tokens_, dh) += dS.transpose() * Q * scale;
      dqkv.block(n * n_tokens_, 2 * dim_ + h * dh, n_tokens_, dh) += dV;
    }
  }
  return qkv_.backward(dqkv);
}

// ---------------------------------------------------------------- TransformerBlock

TransformerBlock::TransformerBlock(ParamStore& store, const std::string& prefix,
                                   Eigen::Index dim, int n_heads, Eigen::Index mlp_hidden,
                                   Rng& rng)
    : ln1_(store, prefix + ".ln1", dim),
      attn_(store, prefix + ".attn", dim, n_heads, rng),
      ln2_(store, prefix + ".ln2", dim),
      fc1_(store, prefix + ".mlp.fc1", dim, mlp_hidden, rng),
      fc2_(store, prefix + ".mlp.fc2", mlp_hidden, dim, rng) {}

Matrix TransformerBlock::forward(const Matrix& x, Eigen::Index n_samples,
                                 Eigen::Index n_tokens) {
  Matrix h = x + attn_.forward(ln1_.forward(x), n_samples, n_tokens);
  return h + fc2_.forward(act_.forward(fc1_.forward(ln2_.forward(h))));
}

Matrix TransformerBlock::backward(const Matrix& dy) {
  Matrix dh = dy + ln2_.backward(fc1_.backward(act_.backward(fc2_.backward(dy))));
  return dh + ln1_.backward(attn_.backward(dh));
}

}  // namespace nodex::nn
