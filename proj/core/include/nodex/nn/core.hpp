#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nodex/common.hpp"
#include "nodex/rng.hpp"

namespace nodex::nn {

/// A named tensor with an optional gradient buffer. Parameters of frozen
/// stores never allocate gradients, which makes "no gradient ever reaches
/// the teacher" a structural property rather than a convention.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;  // 0x0 unless trainable
  bool trainable = true;
  bool no_decay = false;  // vectors (biases, norm gains, tokens) skip weight decay

  void zero_grad() {
    if (trainable) grad.setZero();
  }
  void accumulate(const Matrix& g) {
    if (trainable) grad += g;
  }
  bool is_vector() const { return value.rows() == 1 || value.cols() == 1; }
};

/// Owns parameters in creation order with stable addresses. Layers bind to
/// parameters by name, so several graph replicas (e.g. one per view scale)
/// can share one store.
class ParamStore {
public:
  explicit ParamStore(bool trainable = true) : trainable_(trainable) {}

  Parameter& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  /// Returns the existing parameter (shape-checked) or creates it.
  Parameter& bind(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  const Parameter* find(const std::string& name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t count() const { return params_.size(); }
  std::size_t total_size() const;

  bool trainable() const { return trainable_; }
  void zero_grads();
  Scalar grad_norm() const;

  /// Copies values elementwise; structures must match exactly.
  void copy_values_from(const ParamStore& other);
  /// True when both stores have identical names and shapes in order.
  bool matches(const ParamStore& other) const;

private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
  bool trainable_;
};

/// Fills a parameter with a truncated normal (+-2 sigma), the init used for
/// every weight matrix; biases and norm offsets are zeroed at creation.
void init_trunc_normal(Parameter& p, Rng& rng, Scalar stddev);

}  // namespace nodex::nn
