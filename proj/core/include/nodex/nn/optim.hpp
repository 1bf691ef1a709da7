#pragma once

#include "nodex/nn/core.hpp"

namespace nodex::nn {

/// Adam with decoupled weight decay. Decay touches only matrix-shaped
/// parameters (vectors carry no_decay).
class AdamW {
public:
  explicit AdamW(std::vector<Parameter*> params, Scalar beta1 = 0.9, Scalar beta2 = 0.999,
                 Scalar eps = 1e-8);

  void step(Scalar lr, Scalar weight_decay);
  long steps_taken() const { return t_; }

private:
  struct Slot {
    Parameter* p;
    Matrix m, v;
  };
  std::vector<Slot> slots_;
  Scalar beta1_, beta2_, eps_;
  long t_ = 0;
};

/// Heavy-ball SGD: u <- mu*u + g, p <- p - lr*u.
class SgdMomentum {
public:
  explicit SgdMomentum(std::vector<Parameter*> params, Scalar momentum = 0.9);

  void step(Scalar lr, Scalar weight_decay = 0.0);

private:
  struct Slot {
    Parameter* p;
    Matrix u;
  };
  std::vector<Slot> slots_;
  Scalar momentum_;
};

}  // namespace nodex::nn
