#include "nodex/nn/core.hpp"

#include <cmath>

namespace nodex::nn {

Parameter& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  NODEX_CHECK(!index_.count(name), "ParamStore: duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Matrix::Zero(rows, cols);
  p->trainable = trainable_;
  if (trainable_) p->grad = Matrix::Zero(rows, cols);
  p->no_decay = p->is_vector();
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParamStore::bind(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  auto it = index_.find(name);
  if (it == index_.end()) return create(name, rows, cols);
  Parameter& p = *params_[it->second];
  NODEX_CHECK(p.value.rows() == rows && p.value.cols() == cols,
              "ParamStore: shape mismatch binding " + name);
  return p;
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  NODEX_CHECK(it != index_.end(), "ParamStore: unknown parameter " + name);
  return *params_[it->second];
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  NODEX_CHECK(it != index_.end(), "ParamStore: unknown parameter " + name);
  return *params_[it->second];
}

const Parameter* ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p->zero_grad();
}

Scalar ParamStore::grad_norm() const {
  Scalar s = 0;
  for (const auto& p : params_)
    if (p->trainable) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

bool ParamStore::matches(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Parameter& a = *params_[i];
    const Parameter& b = *other.params_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      return false;
  }
  return true;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  NODEX_CHECK(matches(other), "ParamStore: structure mismatch in copy_values_from");
  for (std::size_t i = 0; i < params_.size(); ++i)
    params_[i]->value = other.params_[i]->value;
}

void init_trunc_normal(Parameter& p, Rng& rng, Scalar stddev) {
  for (Eigen::Index r = 0; r < p.value.rows(); ++r)
    for (Eigen::Index c = 0; c < p.value.cols(); ++c) p.value(r, c) = rng.trunc_normal(stddev);
}

}  // namespace nodex::nn
