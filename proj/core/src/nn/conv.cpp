#include "nodex/nn/conv.hpp"

#include <cmath>

namespace nodex::nn {

Conv2d::Conv2d(ParamStore& store, const std::string& prefix, int in_ch, int out_ch, int ksize,
               int stride, int pad, Rng& rng, bool zero_init)
    : W_(&store.bind(prefix + ".weight", out_ch, in_ch * ksize * ksize)),
      b_(&store.bind(prefix + ".bias", 1, out_ch)),
      in_ch_(in_ch),
      out_ch_(out_ch),
      ksize_(ksize),
      stride_(stride),
      pad_(pad) {
  if (!zero_init && W_->value.isZero(0)) {
    Scalar stddev = std::sqrt(2.0 / static_cast<Scalar>(in_ch * ksize * ksize));
    init_trunc_normal(*W_, rng, stddev);
  }
}

Matrix Conv2d::im2col(const Matrix& x, Eigen::Index sample) const {
  Matrix col(in_ch_ * ksize_ * ksize_, ho_ * wo_);
  for (int c = 0; c < in_ch_; ++c) {
    auto plane = x.row(sample * in_ch_ + c);
    for (int ky = 0; ky < ksize_; ++ky) {
      for (int kx = 0; kx < ksize_; ++kx) {
        int row = (c * ksize_ + ky) * ksize_ + kx;
        for (int oy = 0; oy < ho_; ++oy) {
          int iy = oy * stride_ + ky - pad_;
          for (int ox = 0; ox < wo_; ++ox) {
            int ix = ox * stride_ + kx - pad_;
            Scalar v = 0;
            if (iy >= 0 && iy < h_ && ix >= 0 && ix < w_) v = plane(iy * w_ + ix);
            col(row, oy * wo_ + ox) = v;
          }
        }
      }
    }
  }
  return col;
}

Matrix Conv2d::forward(const Matrix& x, Eigen::Index n_samples, int height, int width) {
  NODEX_CHECK(x.rows() == n_samples * in_ch_ && x.cols() == height * width,
              "Conv2d " + W_->name + ": input shape mismatch");
  n_samples_ = n_samples;
  h_ = height;
  w_ = width;
  ho_ = out_height(height);
  wo_ = out_width(width);
  NODEX_CHECK(ho_ > 0 && wo_ > 0, "Conv2d " + W_->name + ": input smaller than kernel");
  x_ = x;

  Matrix y(n_samples * out_ch_, ho_ * wo_);
  for (Eigen::Index n = 0; n < n_samples; ++n) {
    Matrix col = im2col(x, n);
    Matrix yn = W_->value * col;
    yn.colwise() += b_->value.row(0).transpose();
    y.middleRows(n * out_ch_, out_ch_) = yn;
  }
  return y;
}

Matrix Conv2d::backward(const Matrix& dy) {
  Matrix dx = Matrix::Zero(x_.rows(), x_.cols());
  for (Eigen::Index n = 0; n < n_samples_; ++n) {
    auto dyn = dy.middleRows(n * out_ch_, out_ch_);
    Matrix col = im2col(x_, n);  // recomputed, not cached: keeps memory flat
    W_->accumulate(dyn * col.transpose());
    b_->accumulate(dyn.rowwise().sum().transpose());
    Matrix dcol = W_->value.transpose() * dyn;
    // col2im scatter
    for (int c = 0; c < in_ch_; ++c) {
      auto dplane = dx.row(n * in_ch_ + c);
      for (int ky = 0; ky < ksize_; ++ky) {
        for (int kx = 0; kx < ksize_; ++kx) {
          int row = (c * ksize_ + ky) * ksize_ + kx;
          for (int oy = 0; oy < ho_; ++oy) {
            int iy = oy * stride_ + ky - pad_;
            if (iy < 0 || iy >= h_) continue;
            for (int ox = 0; ox < wo_; ++ox) {
              int ix = ox * stride_ + kx - pad_;
              if (ix < 0 || ix >= w_) continue;
              dx(n * in_ch_ + c, iy * w_ + ix) += dcol(row, oy * wo_ + ox);
            }
          }
        }
      }
    }
  }
  return dx;
}

Matrix GlobalAvgPool::forward(const Matrix& x, Eigen::Index n_samples, int channels) {
  NODEX_CHECK(x.rows() == n_samples * channels, "GlobalAvgPool: shape mismatch");
  n_samples_ = n_samples;
  channels_ = channels;
  spatial_ = x.cols();
  Matrix y(n_samples, channels);
  for (Eigen::Index n = 0; n < n_samples; ++n)
    for (int c = 0; c < channels; ++c) y(n, c) = x.row(n * channels + c).mean();
  return y;
}

Matrix GlobalAvgPool::backward(const Matrix& dy) {
  Matrix dx(n_samples_ * channels_, spatial_);
  Scalar inv = 1.0 / static_cast<Scalar>(spatial_);
  for (Eigen::Index n = 0; n < n_samples_; ++n)
    for (int c = 0; c < channels_; ++c) dx.row(n * channels_ + c).setConstant(dy(n, c) * inv);
  return dx;
}

}  // namespace nodex::nn
