#include "frt/tensor.hpp"

namespace frt {

using detail::make_result;
using detail::track;

namespace {

int64_t norm_axis(int64_t axis, int64_t rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError(msg(op, ": axis out of range"));
  return axis;
}

// outer/inner products around an axis, so a tensor reads as
// (outer, extent, inner) row-major.
void axis_split(const Shape& shape, int64_t axis, int64_t& outer, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) inner *= shape[i];
}

}  // namespace

Tensor transpose(const Tensor& x, int64_t axis0, int64_t axis1) {
  const int64_t r = x.rank();
  axis0 = norm_axis(axis0, r, "transpose");
  axis1 = norm_axis(axis1, r, "transpose");
  if (axis0 == axis1) return reshape(x, x.shape());

  Shape out_shape = x.shape();
  std::swap(out_shape[static_cast<size_t>(axis0)], out_shape[static_cast<size_t>(axis1)]);

  // Row-major strides of the input, read in output-axis order.
  std::vector<int64_t> in_strides(static_cast<size_t>(r), 1);
  for (int64_t i = r - 2; i >= 0; --i) {
    in_strides[static_cast<size_t>(i)] =
        in_strides[static_cast<size_t>(i + 1)] * x.shape()[static_cast<size_t>(i + 1)];
  }
  std::vector<int64_t> perm_strides(static_cast<size_t>(r));
  for (int64_t i = 0; i < r; ++i) perm_strides[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(i)];
  std::swap(perm_strides[static_cast<size_t>(axis0)], perm_strides[static_cast<size_t>(axis1)]);

  const auto xv = x.values();
  const int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  std::vector<int64_t> idx(static_cast<size_t>(r), 0);
  int64_t src = 0;
  for (int64_t i = 0; i < n; ++i) {
    out[static_cast<size_t>(i)] = xv[static_cast<size_t>(src)];
    for (int64_t d = r - 1; d >= 0; --d) {
      ++idx[static_cast<size_t>(d)];
      src += perm_strides[static_cast<size_t>(d)];
      if (idx[static_cast<size_t>(d)] < out_shape[static_cast<size_t>(d)]) break;
      idx[static_cast<size_t>(d)] = 0;
      src -= perm_strides[static_cast<size_t>(d)] * out_shape[static_cast<size_t>(d)];
    }
  }

  Tensor result = make_result(out_shape, std::move(out), track(x), "transpose");
  if (!result.requires_grad()) return result;
  auto xn = x.node(), on = result.node();
  tape().record({"transpose", on, [xn, on, out_shape, perm_strides, r]() {
    xn->ensure_grad();
    std::vector<int64_t> idx(static_cast<size_t>(r), 0);
    int64_t src = 0;
    const int64_t n = static_cast<int64_t>(on->grad.size());
    for (int64_t i = 0; i < n; ++i) {
      xn->grad[static_cast<size_t>(src)] += on->grad[static_cast<size_t>(i)];
      for (int64_t d = r - 1; d >= 0; --d) {
        ++idx[static_cast<size_t>(d)];
        src += perm_strides[static_cast<size_t>(d)];
        if (idx[static_cast<size_t>(d)] < out_shape[static_cast<size_t>(d)]) break;
        idx[static_cast<size_t>(d)] = 0;
        src -= perm_strides[static_cast<size_t>(d)] * out_shape[static_cast<size_t>(d)];
      }
    }
  }});
  return result;
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError(msg("reshape: ", shape_str(x.shape()), " -> ", shape_str(shape),
                         " changes element count"));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  Tensor result = make_result(shape, std::move(out), track(x), "reshape");
  if (!result.requires_grad()) return result;
  auto xn = x.node(), on = result.node();
  tape().record({"reshape", on, [xn, on]() {
    xn->ensure_grad();
    for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
  }});
  return result;
}

Tensor concat(const std::vector<Tensor>& parts, int64_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int64_t r = parts[0].rank();
  axis = norm_axis(axis, r, "concat");
  Shape out_shape = parts[0].shape();
  int64_t total_extent = 0;
  for (const Tensor& p : parts) {
    Shape s = p.shape();
    if (static_cast<int64_t>(s.size()) != r) throw ShapeError("concat: rank mismatch");
    s[static_cast<size_t>(axis)] = out_shape[static_cast<size_t>(axis)];
    if (s != out_shape) {
      throw ShapeError(msg("concat: shape ", shape_str(p.shape()),
                           " incompatible with ", shape_str(parts[0].shape())));
    }
    total_extent += p.dim(axis);
  }
  out_shape[static_cast<size_t>(axis)] = total_extent;

  int64_t outer, inner;
  axis_split(out_shape, axis, outer, inner);
  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  bool any_grad = false;
  int64_t offset = 0;  // running extent offset along axis
  for (const Tensor& p : parts) {
    const int64_t e = p.dim(axis);
    const auto pv = p.values();
    for (int64_t o = 0; o < outer; ++o) {
      const double* src = pv.data() + o * e * inner;
      double* dst = out.data() + (o * total_extent + offset) * inner;
      std::copy(src, src + e * inner, dst);
    }
    offset += e;
    any_grad = any_grad || p.requires_grad();
  }

  Tensor result = make_result(out_shape, std::move(out),
                              tape().recording() && any_grad, "concat");
  if (!result.requires_grad()) return result;

  std::vector<std::shared_ptr<TensorNode>> in_nodes;
  std::vector<int64_t> extents;
  for (const Tensor& p : parts) {
    in_nodes.push_back(p.node());
    extents.push_back(p.dim(axis));
  }
  auto on = result.node();
  tape().record({"concat", on, [in_nodes, extents, on, outer, inner, total_extent]() {
    int64_t offset = 0;
    for (size_t pi = 0; pi < in_nodes.size(); ++pi) {
      const int64_t e = extents[pi];
      auto& node = in_nodes[pi];
      if (node->requires_grad) {
        node->ensure_grad();
        for (int64_t o = 0; o < outer; ++o) {
          const double* src = on->grad.data() + (o * total_extent + offset) * inner;
          double* dst = node->grad.data() + o * e * inner;
          for (int64_t i = 0; i < e * inner; ++i) dst[i] += src[i];
        }
      }
      offset += e;
    }
  }});
  return result;
}

std::vector<Tensor> split(const Tensor& x, int64_t axis, int64_t parts) {
  const int64_t r = x.rank();
  axis = norm_axis(axis, r, "split");
  const int64_t extent = x.dim(axis);
  if (parts < 1 || extent % parts != 0) {
    throw ShapeError(msg("split: extent ", extent, " not divisible into ", parts, " parts"));
  }
  const int64_t e = extent / parts;
  Shape part_shape = x.shape();
  part_shape[static_cast<size_t>(axis)] = e;
  int64_t outer, inner;
  axis_split(x.shape(), axis, outer, inner);

  std::vector<Tensor> out;
  const auto xv = x.values();
  for (int64_t pi = 0; pi < parts; ++pi) {
    std::vector<double> vals(static_cast<size_t>(shape_numel(part_shape)));
    for (int64_t o = 0; o < outer; ++o) {
      const double* src = xv.data() + (o * extent + pi * e) * inner;
      std::copy(src, src + e * inner, vals.data() + o * e * inner);
    }
    Tensor part = make_result(part_shape, std::move(vals), track(x), "split");
    if (part.requires_grad()) {
      auto xn = x.node(), pn = part.node();
      tape().record({"split", pn, [xn, pn, pi, e, outer, inner, extent]() {
        xn->ensure_grad();
        for (int64_t o = 0; o < outer; ++o) {
          const double* src = pn->grad.data() + o * e * inner;
          double* dst = xn->grad.data() + (o * extent + pi * e) * inner;
          for (int64_t i = 0; i < e * inner; ++i) dst[i] += src[i];
        }
      }});
    }
    out.push_back(std::move(part));
  }
  return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& indices) {
  if (table.rank() != 2) {
    throw ShapeError(msg("gather_rows: table must be rank 2, got ", shape_str(table.shape())));
  }
  const int64_t rows = table.dim(0), cols = table.dim(1);
  for (int64_t idx : indices) {
    if (idx < 0 || idx >= rows) throw Error(msg("gather_rows: index ", idx, " out of range [0, ", rows, ")"));
  }
  const int64_t n = static_cast<int64_t>(indices.size());
  std::vector<double> out(static_cast<size_t>(n * cols));
  const auto tv = table.values();
  for (int64_t i = 0; i < n; ++i) {
    const double* src = tv.data() + indices[static_cast<size_t>(i)] * cols;
    std::copy(src, src + cols, out.data() + i * cols);
  }
  Tensor result = make_result({n, cols}, std::move(out), track(table), "gather_rows");
  if (!result.requires_grad()) return result;
  auto tn = table.node(), on = result.node();
  tape().record({"gather_rows", on, [tn, on, indices, cols]() {
    tn->ensure_grad();
    for (size_t i = 0; i < indices.size(); ++i) {
      const double* src = on->grad.data() + static_cast<int64_t>(i) * cols;
      double* dst = tn->grad.data() + indices[i] * cols;
      for (int64_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  }});
  return result;
}

}  // namespace frt
