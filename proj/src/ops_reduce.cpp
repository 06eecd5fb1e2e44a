#include <cmath>

#include "frt/tensor.hpp"

namespace frt {

using detail::make_result;
using detail::track;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(msg(op, ": shapes ", shape_str(a.shape()), " and ",
                         shape_str(b.shape()), " differ"));
  }
}

}  // namespace

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  Tensor result = make_result({1}, {acc}, track(x), "sum");
  if (!result.requires_grad()) return result;
  auto xn = x.node(), on = result.node();
  tape().record({"sum", on, [xn, on]() {
    xn->ensure_grad();
    const double g = on->grad[0];
    for (auto& gv : xn->grad) gv += g;
  }});
  return result;
}

Tensor mean(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  const double inv_n = 1.0 / static_cast<double>(x.numel());
  Tensor result = make_result({1}, {acc * inv_n}, track(x), "mean");
  if (!result.requires_grad()) return result;
  auto xn = x.node(), on = result.node();
  tape().record({"mean", on, [xn, on, inv_n]() {
    xn->ensure_grad();
    const double g = on->grad[0] * inv_n;
    for (auto& gv : xn->grad) gv += g;
  }});
  return result;
}

Tensor l1_mean(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "l1_mean");
  const auto av = a.values(), bv = b.values();
  double acc = 0.0;
  for (size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
  const double inv_n = 1.0 / static_cast<double>(a.numel());
  Tensor result = make_result({1}, {acc * inv_n}, track(a, b), "l1_mean");
  if (!result.requires_grad()) return result;
  auto an = a.node(), bn = b.node(), on = result.node();
  tape().record({"l1_mean", on, [an, bn, on, inv_n]() {
    const double g = on->grad[0] * inv_n;
    if (an->requires_grad) an->ensure_grad();
    if (bn->requires_grad) bn->ensure_grad();
    for (size_t i = 0; i < an->values.size(); ++i) {
      const double d = an->values[i] - bn->values[i];
      const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      if (an->requires_grad) an->grad[i] += g * s;
      if (bn->requires_grad) bn->grad[i] -= g * s;
    }
  }});
  return result;
}

Tensor sq_l2_mean(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sq_l2_mean");
  const auto av = a.values(), bv = b.values();
  double acc = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  const double inv_n = 1.0 / static_cast<double>(a.numel());
  Tensor result = make_result({1}, {acc * inv_n}, track(a, b), "sq_l2_mean");
  if (!result.requires_grad()) return result;
  auto an = a.node(), bn = b.node(), on = result.node();
  tape().record({"sq_l2_mean", on, [an, bn, on, inv_n]() {
    const double g = on->grad[0] * inv_n * 2.0;
    if (an->requires_grad) an->ensure_grad();
    if (bn->requires_grad) bn->ensure_grad();
    for (size_t i = 0; i < an->values.size(); ++i) {
      const double d = an->values[i] - bn->values[i];
      if (an->requires_grad) an->grad[i] += g * d;
      if (bn->requires_grad) bn->grad[i] -= g * d;
    }
  }});
  return result;
}

Tensor softmax(const Tensor& x, int64_t axis) {
  const int64_t r = x.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ShapeError("softmax: axis out of range");
  int64_t outer = 1, inner = 1;
  const int64_t extent = x.shape()[static_cast<size_t>(axis)];
  for (int64_t i = 0; i < axis; ++i) outer *= x.shape()[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < x.shape().size(); ++i) inner *= x.shape()[i];

  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      const int64_t base = o * extent * inner + i;
      double mx = xv[static_cast<size_t>(base)];
      for (int64_t e = 1; e < extent; ++e) mx = std::max(mx, xv[static_cast<size_t>(base + e * inner)]);
      double denom = 0.0;
      for (int64_t e = 0; e < extent; ++e) {
        const double ev = std::exp(xv[static_cast<size_t>(base + e * inner)] - mx);
        out[static_cast<size_t>(base + e * inner)] = ev;
        denom += ev;
      }
      const double inv = 1.0 / denom;
      for (int64_t e = 0; e < extent; ++e) out[static_cast<size_t>(base + e * inner)] *= inv;
    }
  }

  Tensor result = make_result(x.shape(), std::move(out), track(x), "softmax");
  if (!result.requires_grad()) return result;
  auto xn = x.node(), on = result.node();
  tape().record({"softmax", on, [xn, on, outer, inner, extent]() {
    xn->ensure_grad();
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t i = 0; i < inner; ++i) {
        const int64_t base = o * extent * inner + i;
        double dot = 0.0;
        for (int64_t e = 0; e < extent; ++e) {
          const size_t k = static_cast<size_t>(base + e * inner);
          dot += on->grad[k] * on->values[k];
        }
        for (int64_t e = 0; e < extent; ++e) {
          const size_t k = static_cast<size_t>(base + e * inner);
          xn->grad[k] += on->values[k] * (on->grad[k] - dot);
        }
      }
    }
  }});
  return result;
}

// Normalizes over the channel (last) axis per position.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (eps <= 0.0) throw Error("layer_norm: eps must be > 0");
  const int64_t c = x.dim(-1);
  if (gain.numel() != c || bias.numel() != c) {
    throw ShapeError(msg("layer_norm: gain/bias length must be ", c));
  }
  const int64_t rows = x.numel() / c;
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();

  std::vector<double> out(xv.size());
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  for (int64_t row = 0; row < rows; ++row) {
    const double* xr = xv.data() + row * c;
    double mu = 0.0;
    for (int64_t j = 0; j < c; ++j) mu += xr[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      const double d = xr[j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(row)] = is;
    for (int64_t j = 0; j < c; ++j) {
      const double h = (xr[j] - mu) * is;
      (*xhat)[static_cast<size_t>(row * c + j)] = h;
      out[static_cast<size_t>(row * c + j)] = gv[static_cast<size_t>(j)] * h + bv[static_cast<size_t>(j)];
    }
  }

  Tensor result = make_result(x.shape(), std::move(out), track(x, gain, bias), "layer_norm");
  if (!result.requires_grad()) return result;
  auto xn = x.node(), gn = gain.node(), bn = bias.node(), on = result.node();
  tape().record({"layer_norm", on, [xn, gn, bn, on, xhat, inv_std, rows, c]() {
    if (xn->requires_grad) xn->ensure_grad();
    if (gn->requires_grad) gn->ensure_grad();
    if (bn->requires_grad) bn->ensure_grad();
    for (int64_t row = 0; row < rows; ++row) {
      const double* g = on->grad.data() + row * c;
      const double* h = xhat->data() + row * c;
      if (gn->requires_grad || bn->requires_grad) {
        for (int64_t j = 0; j < c; ++j) {
          if (gn->requires_grad) gn->grad[static_cast<size_t>(j)] += g[j] * h[j];
          if (bn->requires_grad) bn->grad[static_cast<size_t>(j)] += g[j];
        }
      }
      if (xn->requires_grad) {
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (int64_t j = 0; j < c; ++j) {
          const double dh = g[j] * gn->values[static_cast<size_t>(j)];
          mean_dh += dh;
          mean_dh_h += dh * h[j];
        }
        mean_dh /= static_cast<double>(c);
        mean_dh_h /= static_cast<double>(c);
        const double is = (*inv_std)[static_cast<size_t>(row)];
        for (int64_t j = 0; j < c; ++j) {
          const double dh = g[j] * gn->values[static_cast<size_t>(j)];
          xn->grad[static_cast<size_t>(row * c + j)] += is * (dh - mean_dh - h[j] * mean_dh_h);
        }
      }
    }
  }});
  return result;
}

// Normalizes per sample over (H, W, channels-within-group).
Tensor group_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  int64_t groups, double eps) {
  if (eps <= 0.0) throw Error("group_norm: eps must be > 0");
  if (x.rank() != 3 && x.rank() != 4) {
    throw ShapeError(msg("group_norm: expected (H,W,C) or (N,H,W,C), got ", shape_str(x.shape())));
  }
  const int64_t c = x.dim(-1);
  const int64_t samples = x.rank() == 4 ? x.dim(0) : 1;
  const int64_t hw = x.numel() / (samples * c);
  if (groups < 1 || c % groups != 0) {
    throw ShapeError(msg("group_norm: ", groups, " groups do not divide ", c, " channels"));
  }
  if (gain.numel() != c || bias.numel() != c) {
    throw ShapeError(msg("group_norm: gain/bias length must be ", c));
  }
  const int64_t cg = c / groups;
  const double m = static_cast<double>(hw * cg);

  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<double> out(xv.size());
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(samples * groups));

  for (int64_t s = 0; s < samples; ++s) {
    const int64_t sbase = s * hw * c;
    for (int64_t grp = 0; grp < groups; ++grp) {
      double mu = 0.0;
      for (int64_t p = 0; p < hw; ++p) {
        const double* px = xv.data() + sbase + p * c + grp * cg;
        for (int64_t j = 0; j < cg; ++j) mu += px[j];
      }
      mu /= m;
      double var = 0.0;
      for (int64_t p = 0; p < hw; ++p) {
        const double* px = xv.data() + sbase + p * c + grp * cg;
        for (int64_t j = 0; j < cg; ++j) {
          const double d = px[j] - mu;
          var += d * d;
        }
      }
      var /= m;
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[static_cast<size_t>(s * groups + grp)] = is;
      for (int64_t p = 0; p < hw; ++p) {
        const int64_t off = sbase + p * c + grp * cg;
        for (int64_t j = 0; j < cg; ++j) {
          const double h = (xv[static_cast<size_t>(off + j)] - mu) * is;
          (*xhat)[static_cast<size_t>(off + j)] = h;
          out[static_cast<size_t>(off + j)] =
              gv[static_cast<size_t>(grp * cg + j)] * h + bv[static_cast<size_t>(grp * cg + j)];
        }
      }
    }
  }

  Tensor result = make_result(x.shape(), std::move(out), track(x, gain, bias), "group_norm");
  if (!result.requires_grad()) return result;
  auto xn = x.node(), gn = gain.node(), bn = bias.node(), on = result.node();
  tape().record({"group_norm", on, [xn, gn, bn, on, xhat, inv_std, samples, groups, hw, cg, c, m]() {
    if (xn->requires_grad) xn->ensure_grad();
    if (gn->requires_grad) gn->ensure_grad();
    if (bn->requires_grad) bn->ensure_grad();
    for (int64_t s = 0; s < samples; ++s) {
      const int64_t sbase = s * hw * c;
      for (int64_t grp = 0; grp < groups; ++grp) {
        if (gn->requires_grad || bn->requires_grad) {
          for (int64_t p = 0; p < hw; ++p) {
            const int64_t off = sbase + p * c + grp * cg;
            for (int64_t j = 0; j < cg; ++j) {
              const size_t k = static_cast<size_t>(off + j);
              const size_t ch = static_cast<size_t>(grp * cg + j);
              if (gn->requires_grad) gn->grad[ch] += on->grad[k] * (*xhat)[k];
              if (bn->requires_grad) bn->grad[ch] += on->grad[k];
            }
          }
        }
        if (!xn->requires_grad) continue;
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (int64_t p = 0; p < hw; ++p) {
          const int64_t off = sbase + p * c + grp * cg;
          for (int64_t j = 0; j < cg; ++j) {
            const size_t k = static_cast<size_t>(off + j);
            const double dh = on->grad[k] * gn->values[static_cast<size_t>(grp * cg + j)];
            mean_dh += dh;
            mean_dh_h += dh * (*xhat)[k];
          }
        }
        mean_dh /= m;
        mean_dh_h /= m;
        const double is = (*inv_std)[static_cast<size_t>(s * groups + grp)];
        for (int64_t p = 0; p < hw; ++p) {
          const int64_t off = sbase + p * c + grp * cg;
          for (int64_t j = 0; j < cg; ++j) {
            const size_t k = static_cast<size_t>(off + j);
            const double dh = on->grad[k] * gn->values[static_cast<size_t>(grp * cg + j)];
            xn->grad[k] += is * (dh - mean_dh - (*xhat)[k] * mean_dh_h);
          }
        }
      }
    }
  }});
  return result;
}

}  // namespace frt
