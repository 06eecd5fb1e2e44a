#include "frt/optim.hpp"

#include <cmath>

namespace frt {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  if (has(name)) throw Error(msg("ParamStore: duplicate parameter '", name, "'"));
  t.set_requires_grad(true);
  order_.push_back(name);
  params_.emplace(name, t);
  return t;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(msg("ParamStore: unknown parameter '", name, "'"));
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(msg("ParamStore: unknown parameter '", name, "'"));
  return it->second;
}

void ParamStore::set_trainable(bool on) {
  for (auto& name : order_) params_.at(name).set_requires_grad(on);
}

void ParamStore::zero_grads() {
  for (auto& name : order_) params_.at(name).zero_grad();
}

ParamStore ParamStore::subset(const std::string& prefix) const {
  ParamStore out;
  for (const auto& name : order_) {
    if (name.rfind(prefix, 0) == 0) {
      out.order_.push_back(name);
      out.params_.emplace(name, params_.at(name));
    }
  }
  return out;
}

void ParamStore::merge(const ParamStore& other) {
  for (const auto& name : other.order_) {
    if (has(name)) throw Error(msg("ParamStore::merge: duplicate parameter '", name, "'"));
    order_.push_back(name);
    params_.emplace(name, other.params_.at(name));
  }
}

void Adam::step(ParamStore& params) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));

  for (const auto& name : params.names()) {
    Tensor& p = params.get(name);
    if (!p.has_grad()) {
      throw Error(msg("Adam::step: parameter '", name, "' has no gradient"));
    }
    auto& mom = moments_[name];
    const size_t n = p.node()->values.size();
    if (mom.m.empty()) {
      mom.m.assign(n, 0.0);
      mom.v.assign(n, 0.0);
    }
    auto& values = p.node()->values;
    const auto& grad = p.node()->grad;
    for (size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      mom.m[i] = config_.beta1 * mom.m[i] + (1.0 - config_.beta1) * g;
      mom.v[i] = config_.beta2 * mom.v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = mom.m[i] / bc1;
      const double v_hat = mom.v[i] / bc2;
      values[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
      if (!std::isfinite(values[i])) {
        throw NumericError(msg("Adam::step: parameter '", name, "' became non-finite"));
      }
    }
  }
  for (const auto& name : params.names()) params.get(name).zero_grad();
}

}  // namespace frt
