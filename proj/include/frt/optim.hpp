#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "frt/tensor.hpp"

namespace frt {

// Named map of trainable tensors. Iteration follows insertion order so that
// optimizer sweeps and checkpoints are deterministic.
class ParamStore {
 public:
  Tensor add(const std::string& name, Tensor t);
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  size_t size() const { return order_.size(); }

  void set_trainable(bool on);
  void zero_grads();

  // Handles alias the underlying buffers: stepping the subset updates the
  // originals. Used to split generator/discriminator parameter sets.
  ParamStore subset(const std::string& prefix) const;
  void merge(const ParamStore& other);

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> params_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are keyed by parameter name and
// share the parameter's shape; the step counter is global to the optimizer.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  // Applies one update in place and zeroes all gradients afterward.
  // A parameter without a populated gradient is an error.
  void step(ParamStore& params);

  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  int64_t step_count() const { return step_count_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamConfig config_;
  std::unordered_map<std::string, Moments> moments_;
  int64_t step_count_ = 0;
};

}  // namespace frt
