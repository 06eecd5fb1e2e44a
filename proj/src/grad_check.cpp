#include "frt/grad_check.hpp"

#include <cmath>

namespace frt {

double grad_check(const TensorFn& fn, const std::vector<Tensor>& inputs, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw Error(msg("grad_check: eps ", eps, " outside [1e-7, 1e-3]"));
  }

  // Independent leaves so caller tensors are untouched.
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& in : inputs) {
    std::vector<double> vals(in.values().begin(), in.values().end());
    Tensor leaf = Tensor::from_data(in.shape(), std::move(vals));
    leaf.set_requires_grad(true);
    leaves.push_back(std::move(leaf));
  }

  tape().reset();
  Tensor loss = fn(leaves);
  if (loss.numel() != 1) throw ShapeError("grad_check: fn must return a scalar");
  tape().backward(loss);

  std::vector<std::vector<double>> analytic;
  for (Tensor& leaf : leaves) {
    if (leaf.has_grad()) {
      analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
    } else {
      analytic.emplace_back(leaf.numel(), 0.0);
    }
  }
  tape().reset();

  double max_rel = 0.0;
  {
    NoGradGuard no_grad;
    for (size_t li = 0; li < leaves.size(); ++li) {
      auto vals = leaves[li].values_mut();
      for (size_t i = 0; i < vals.size(); ++i) {
        const double orig = vals[i];
        vals[i] = orig + eps;
        const double f_plus = fn(leaves).item();
        vals[i] = orig - eps;
        const double f_minus = fn(leaves).item();
        vals[i] = orig;
        const double numeric = (f_plus - f_minus) / (2.0 * eps);
        const double a = analytic[li][i];
        const double rel = std::abs(a - numeric) /
                           std::max({1.0, std::abs(a), std::abs(numeric)});
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  return max_rel;
}

}  // namespace frt
