#include "frt/tensor.hpp"

namespace frt {

using detail::gemm_nn;
using detail::gemm_nt;
using detail::gemm_tn;
using detail::make_result;
using detail::track;

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError(msg("matmul: operands must be rank >= 2, got ",
                         shape_str(a.shape()), " x ", shape_str(b.shape())));
  }
  const int64_t m = a.dim(-2), ka = a.dim(-1);
  const int64_t kb = b.dim(-2), n = b.dim(-1);
  if (ka != kb) {
    throw ShapeError(msg("matmul: inner dims differ: ", shape_str(a.shape()),
                         " x ", shape_str(b.shape())));
  }
  const Shape lead_a(a.shape().begin(), a.shape().end() - 2);
  const Shape lead_b(b.shape().begin(), b.shape().end() - 2);
  bool shared_a = false, shared_b = false;
  Shape lead;
  if (lead_a == lead_b) {
    lead = lead_a;
  } else if (lead_b.empty()) {
    lead = lead_a;
    shared_b = true;
  } else if (lead_a.empty()) {
    lead = lead_b;
    shared_a = true;
  } else {
    throw ShapeError(msg("matmul: incompatible batch dims: ", shape_str(a.shape()),
                         " x ", shape_str(b.shape())));
  }
  const int64_t batch = shape_numel(lead);

  Shape out_shape = lead;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(static_cast<size_t>(batch * m * n), 0.0);

  const double* ap = a.values().data();
  const double* bp = b.values().data();
  const int64_t a_step = shared_a ? 0 : m * ka;
  const int64_t b_step = shared_b ? 0 : ka * n;
  for (int64_t s = 0; s < batch; ++s) {
    gemm_nn(ap + s * a_step, bp + s * b_step, out.data() + s * m * n, m, ka, n);
  }

  Tensor result = make_result(std::move(out_shape), std::move(out), track(a, b), "matmul");
  if (!result.requires_grad()) return result;

  auto an = a.node(), bn = b.node(), on = result.node();
  const int64_t k = ka;
  tape().record({"matmul", on, [an, bn, on, batch, m, k, n, a_step, b_step]() {
    const double* g = on->grad.data();
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t s = 0; s < batch; ++s) {
        // dA = dC * B^T
        gemm_nt(g + s * m * n, bn->values.data() + s * b_step,
                an->grad.data() + s * a_step, m, n, k);
      }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t s = 0; s < batch; ++s) {
        // dB = A^T * dC
        gemm_tn(an->values.data() + s * a_step, g + s * m * n,
                bn->grad.data() + s * b_step, k, m, n);
      }
    }
  }});
  return result;
}

}  // namespace frt
