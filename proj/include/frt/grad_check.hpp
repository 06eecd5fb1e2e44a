#pragma once

#include <functional>
#include <vector>

#include "frt/tensor.hpp"

namespace frt {

using TensorFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares tape gradients of a scalar-valued function against central finite
// differences at every input coordinate. Returns the max over coordinates of
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
// The function must be deterministic; eps must lie in [1e-7, 1e-3]. Resets
// the calling thread's tape.
double grad_check(const TensorFn& fn, const std::vector<Tensor>& inputs, double eps);

}  // namespace frt
