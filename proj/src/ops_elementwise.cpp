#include <cmath>

#include "frt/tensor.hpp"

namespace frt {
namespace {

using detail::make_result;
using detail::track;

struct Bcast {
  Shape out;
  std::vector<int64_t> stride_a;  // per out dim; 0 on broadcast dims
  std::vector<int64_t> stride_b;
  bool same = false;
};

Bcast make_bcast(const Shape& a, const Shape& b, const char* op) {
  Bcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  const size_t rank = std::max(a.size(), b.size());
  bc.out.resize(rank);
  bc.stride_a.assign(rank, 0);
  bc.stride_b.assign(rank, 0);
  // Right-aligned extents, then row-major strides with 0 on size-1 dims.
  std::vector<int64_t> ea(rank, 1), eb(rank, 1);
  for (size_t i = 0; i < a.size(); ++i) ea[rank - a.size() + i] = a[i];
  for (size_t i = 0; i < b.size(); ++i) eb[rank - b.size() + i] = b[i];
  for (size_t i = 0; i < rank; ++i) {
    if (ea[i] != eb[i] && ea[i] != 1 && eb[i] != 1) {
      throw ShapeError(msg(op, ": shapes ", shape_str(a), " and ", shape_str(b),
                           " do not broadcast"));
    }
    bc.out[i] = std::max(ea[i], eb[i]);
  }
  int64_t sa = 1, sb = 1;
  for (size_t i = rank; i-- > 0;) {
    bc.stride_a[i] = (ea[i] == 1) ? 0 : sa;
    bc.stride_b[i] = (eb[i] == 1) ? 0 : sb;
    sa *= ea[i];
    sb *= eb[i];
  }
  return bc;
}

// Calls f(out_index, a_offset, b_offset) for every output position.
template <typename F>
void bcast_walk(const Bcast& bc, F&& f) {
  const int64_t n = shape_numel(bc.out);
  const size_t rank = bc.out.size();
  std::vector<int64_t> idx(rank, 0);
  int64_t oa = 0, ob = 0;
  for (int64_t i = 0; i < n; ++i) {
    f(i, oa, ob);
    for (size_t d = rank; d-- > 0;) {
      ++idx[d];
      oa += bc.stride_a[d];
      ob += bc.stride_b[d];
      if (idx[d] < bc.out[d]) break;
      idx[d] = 0;
      oa -= bc.stride_a[d] * bc.out[d];
      ob -= bc.stride_b[d] * bc.out[d];
    }
  }
}

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind, const char* op) {
  const Bcast bc = make_bcast(a.shape(), b.shape(), op);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(static_cast<size_t>(shape_numel(bc.out)));

  if (bc.same) {
    const size_t n = out.size();
    switch (kind) {
      case BinKind::Add:
        for (size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i];
        break;
      case BinKind::Sub:
        for (size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i];
        break;
      case BinKind::Mul:
        for (size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i];
        break;
    }
  } else {
    bcast_walk(bc, [&](int64_t i, int64_t oa, int64_t ob) {
      switch (kind) {
        case BinKind::Add: out[i] = av[oa] + bv[ob]; break;
        case BinKind::Sub: out[i] = av[oa] - bv[ob]; break;
        case BinKind::Mul: out[i] = av[oa] * bv[ob]; break;
      }
    });
  }

  Tensor result = make_result(bc.out, std::move(out), track(a, b), op);
  if (!result.requires_grad()) return result;

  auto an = a.node(), bn = b.node(), on = result.node();
  tape().record({op, on, [an, bn, on, bc, kind]() {
    const auto& g = on->grad;
    const bool wa = an->requires_grad;
    const bool wb = bn->requires_grad;
    if (wa) an->ensure_grad();
    if (wb) bn->ensure_grad();
    if (bc.same) {
      const size_t n = g.size();
      for (size_t i = 0; i < n; ++i) {
        switch (kind) {
          case BinKind::Add:
            if (wa) an->grad[i] += g[i];
            if (wb) bn->grad[i] += g[i];
            break;
          case BinKind::Sub:
            if (wa) an->grad[i] += g[i];
            if (wb) bn->grad[i] -= g[i];
            break;
          case BinKind::Mul:
            if (wa) an->grad[i] += g[i] * bn->values[i];
            if (wb) bn->grad[i] += g[i] * an->values[i];
            break;
        }
      }
    } else {
      bcast_walk(bc, [&](int64_t i, int64_t oa, int64_t ob) {
        switch (kind) {
          case BinKind::Add:
            if (wa) an->grad[oa] += g[i];
            if (wb) bn->grad[ob] += g[i];
            break;
          case BinKind::Sub:
            if (wa) an->grad[oa] += g[i];
            if (wb) bn->grad[ob] -= g[i];
            break;
          case BinKind::Mul:
            if (wa) an->grad[oa] += g[i] * bn->values[ob];
            if (wb) bn->grad[ob] += g[i] * an->values[oa];
            break;
        }
      });
    }
  }});
  return result;
}

// dfn(x, y) is d(out)/d(in) given input x and output y.
Tensor unary_op(const Tensor& x, const char* op, double (*fwd)(double),
                double (*dfn)(double, double)) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);

  Tensor result = make_result(x.shape(), std::move(out), track(x), op);
  if (!result.requires_grad()) return result;

  auto xn = x.node(), on = result.node();
  tape().record({op, on, [xn, on, dfn]() {
    xn->ensure_grad();
    const auto& g = on->grad;
    for (size_t i = 0; i < g.size(); ++i) {
      xn->grad[i] += g[i] * dfn(xn->values[i], on->values[i]);
    }
  }});
  return result;
}

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logsigmoid_scalar(double x) {
  return x < 0.0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  if (!std::isfinite(factor)) throw NumericError("scale: non-finite factor");
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  Tensor result = make_result(a.shape(), std::move(out), track(a), "scale");
  if (!result.requires_grad()) return result;
  auto an = a.node(), on = result.node();
  tape().record({"scale", on, [an, on, factor]() {
    an->ensure_grad();
    for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * factor;
  }});
  return result;
}

Tensor relu(const Tensor& x) {
  // Subgradient at 0 is defined as 0.
  return unary_op(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor silu(const Tensor& x) {
  return unary_op(
      x, "silu", [](double v) { return v * sigmoid_scalar(v); },
      [](double v, double) {
        const double s = sigmoid_scalar(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, "sigmoid", sigmoid_scalar,
      [](double, double y) { return y * (1.0 - y); });
}

Tensor logsigmoid(const Tensor& x) {
  return unary_op(
      x, "logsigmoid", logsigmoid_scalar,
      [](double v, double) { return sigmoid_scalar(-v); });
}

Tensor log(const Tensor& x) {
  // log of a non-positive value produces a non-finite output, which the
  // finiteness check turns into a NumericError.
  return unary_op(
      x, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor abs(const Tensor& x) {
  return unary_op(
      x, "abs", [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor detach(const Tensor& x) {
  auto node = std::make_shared<TensorNode>();
  node->shape = x.shape();
  node->values.assign(x.values().begin(), x.values().end());
  node->requires_grad = false;
  return Tensor(std::move(node));
}

Tensor straight_through(const Tensor& source, const Tensor& quantized) {
  if (source.shape() != quantized.shape()) {
    throw ShapeError(msg("straight_through: shapes ", shape_str(source.shape()),
                         " and ", shape_str(quantized.shape()), " differ"));
  }
  std::vector<double> out(quantized.values().begin(), quantized.values().end());
  Tensor result = make_result(quantized.shape(), std::move(out),
                              track(source), "straight_through");
  if (!result.requires_grad()) return result;
  auto sn = source.node(), on = result.node();
  tape().record({"straight_through", on, [sn, on]() {
    sn->ensure_grad();
    for (size_t i = 0; i < on->grad.size(); ++i) sn->grad[i] += on->grad[i];
  }});
  return result;
}

}  // namespace frt
