#pragma once

#include "nodex/nn/core.hpp"

namespace nodex::nn {

// Layers cache forward activations and implement explicit backward passes.
// Activations live on the layer instance, parameters in the shared store, so
// multiple graph replicas over the same parameters can be alive at once
// (global and local view batches are separate replicas).
//
// Convention: activations are [rows, features]; a "row" is a sample, or a
// token of a sample in transformer blocks.

Matrix softmax_rows(const Matrix& logits);

class Linear {
public:
  Linear(ParamStore& store, const std::string& prefix, Eigen::Index in, Eigen::Index out,
         Rng& rng, Scalar init_std = 0.02, bool with_bias = true);

  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);

  Parameter& weight() { return *W_; }
  Parameter* bias() { return b_; }
  Eigen::Index in_dim() const { return W_->value.rows(); }
  Eigen::Index out_dim() const { return W_->value.cols(); }

private:
  Parameter* W_;  // [in, out]
  Parameter* b_;  // [1, out], may be null
  Matrix x_;
};

class Gelu {
public:
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);

private:
  Matrix x_;
};

class LayerNorm {
public:
  LayerNorm(ParamStore& store, const std::string& prefix, Eigen::Index dim, Scalar eps = 1e-6);

  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);

private:
  Parameter* gamma_;  // [1, dim]
  Parameter* beta_;   // [1, dim]
  Scalar eps_;
  Matrix xhat_;
  Vector inv_std_;
};

/// Row-wise l2 normalisation, y = x / max(||x||, eps).
class L2NormalizeRows {
public:
  explicit L2NormalizeRows(Scalar eps = 1e-12) : eps_(eps) {}
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);

private:
  Scalar eps_;
  Matrix y_;
  Vector norms_;
};

/// Linear layer in weight-normalised parameterisation: the effective weight
/// column j is g_j * v_j / ||v_j||, so every output unit's direction vector
/// has unit norm whatever the current v. No bias. The gain g defaults to a
/// frozen 1 (the direction is trained, the scale is not).
class WeightNormLinear {
public:
  WeightNormLinear(ParamStore& store, const std::string& prefix, Eigen::Index in,
                   Eigen::Index out, Rng& rng, bool train_gain = false);

  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);
  Matrix effective_weight() const;

  Parameter& direction() { return *v_; }
  Parameter& gain() { return *g_; }

private:
  Parameter* v_;  // [in, out]
  Parameter* g_;  // [1, out]
  bool train_gain_;
  Matrix x_;
  Matrix w_eff_;
  Vector norms_;
};

class MultiHeadAttention {
public:
  MultiHeadAttention(ParamStore& store, const std::string& prefix, Eigen::Index dim,
                     int n_heads, Rng& rng);

  /// x is [n_samples * n_tokens, dim], tokens of one sample contiguous.
  Matrix forward(const Matrix& x, Eigen::Index n_samples, Eigen::Index n_tokens);
  Matrix backward(const Matrix& dy);

private:
  Linear qkv_;
  Linear proj_;
  Eigen::Index dim_;
  int n_heads_;
  Eigen::Index n_samples_ = 0, n_tokens_ = 0;
  Matrix qkv_out_;
  std::vector<Matrix> attn_;  // one [T,T] softmax per (sample, head)
};

/// Pre-norm transformer block: x + Attn(LN(x)), then x + MLP(LN(x)).
class TransformerBlock {
public:
  TransformerBlock(ParamStore& store, const std::string& prefix, Eigen::Index dim, int n_heads,
                   Eigen::Index mlp_hidden, Rng& rng);

  Matrix forward(const Matrix& x, Eigen::Index n_samples, Eigen::Index n_tokens);
  Matrix backward(const Matrix& dy);

private:
  LayerNorm ln1_;
  MultiHeadAttention attn_;
  LayerNorm ln2_;
  Linear fc1_;
  Gelu act_;
  Linear fc2_;
};

}  // namespace nodex::nn
