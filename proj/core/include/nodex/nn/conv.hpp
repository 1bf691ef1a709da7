#pragma once

#include "nodex/nn/core.hpp"

namespace nodex::nn {

/// Feature maps are [n_samples * channels, height * width]: the channel rows
/// of one sample are contiguous.

class Conv2d {
public:
  Conv2d(ParamStore& store, const std::string& prefix, int in_ch, int out_ch, int ksize,
         int stride, int pad, Rng& rng, bool zero_init = false);

  Matrix forward(const Matrix& x, Eigen::Index n_samples, int height, int width);
  Matrix backward(const Matrix& dy);

  int out_height(int h) const { return (h + 2 * pad_ - ksize_) / stride_ + 1; }
  int out_width(int w) const { return (w + 2 * pad_ - ksize_) / stride_ + 1; }
  int out_channels() const { return out_ch_; }

private:
  Matrix im2col(const Matrix& x, Eigen::Index sample) const;

  Parameter* W_;  // [out_ch, in_ch * k * k]
  Parameter* b_;  // [1, out_ch]
  int in_ch_, out_ch_, ksize_, stride_, pad_;
  Eigen::Index n_samples_ = 0;
  int h_ = 0, w_ = 0, ho_ = 0, wo_ = 0;
  Matrix x_;
};

/// Mean over the spatial extent per channel: [N*C, H*W] -> [N, C].
class GlobalAvgPool {
public:
  Matrix forward(const Matrix& x, Eigen::Index n_samples, int channels);
  Matrix backward(const Matrix& dy);

private:
  Eigen::Index n_samples_ = 0;
  int channels_ = 0;
  Eigen::Index spatial_ = 0;
};

}  // namespace nodex::nn
