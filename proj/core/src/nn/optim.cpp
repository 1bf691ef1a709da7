#include "nodex/nn/optim.hpp"

#include <cmath>

namespace nodex::nn {

AdamW::AdamW(std::vector<Parameter*> params, Scalar beta1, Scalar beta2, Scalar eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Parameter* p : params) {
    NODEX_CHECK(p->trainable, "AdamW: parameter " + p->name + " is not trainable");
    slots_.push_back({p, Matrix::Zero(p->value.rows(), p->value.cols()),
                      Matrix::Zero(p->value.rows(), p->value.cols())});
  }
}

void AdamW::step(Scalar lr, Scalar weight_decay) {
  ++t_;
  Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(t_));
  Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(t_));
  for (Slot& s : slots_) {
    s.m = beta1_ * s.m + (1.0 - beta1_) * s.p->grad;
    s.v = beta2_ * s.v + (1.0 - beta2_) * s.p->grad.cwiseProduct(s.p->grad);
    Matrix mhat = s.m / bc1;
    Matrix vhat = s.v / bc2;
    s.p->value -=
        lr * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
    if (weight_decay > 0 && !s.p->no_decay) s.p->value *= (1.0 - lr * weight_decay);
  }
}

SgdMomentum::SgdMomentum(std::vector<Parameter*> params, Scalar momentum) : momentum_(momentum) {
  for (Parameter* p : params) {
    NODEX_CHECK(p->trainable, "SgdMomentum: parameter " + p->name + " is not trainable");
    slots_.push_back({p, Matrix::Zero(p->value.rows(), p->value.cols())});
  }
}

void SgdMomentum::step(Scalar lr, Scalar weight_decay) {
  for (Slot& s : slots_) {
    Matrix g = s.p->grad;
    if (weight_decay > 0 && !s.p->no_decay) g += weight_decay * s.p->value;
    s.u = momentum_ * s.u + g;
    s.p->value -= lr * s.u;
  }
}

}  // namespace nodex::nn
