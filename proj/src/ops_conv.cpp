#include <algorithm>

#include "frt/tensor.hpp"

namespace frt {

using detail::gemm_nn;
using detail::gemm_nt;
using detail::gemm_tn;
using detail::make_result;
using detail::track;

namespace {

struct ConvDims {
  int64_t n, h, w, cin;       // input
  int64_t kh, kw, cout;       // kernel
  int64_t ho, wo;             // output
  int64_t stride, pad;
  bool batched;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int64_t stride, int64_t pad) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw ShapeError(msg("conv2d: input must be (H,W,C) or (N,H,W,C), got ", shape_str(x.shape())));
  }
  if (w.rank() != 4) {
    throw ShapeError(msg("conv2d: kernel must be (KH,KW,Cin,Cout), got ", shape_str(w.shape())));
  }
  if (stride < 1 || pad < 0) throw Error("conv2d: stride must be >= 1 and pad >= 0");
  ConvDims d;
  d.batched = x.rank() == 4;
  d.n = d.batched ? x.dim(0) : 1;
  d.h = x.dim(d.batched ? 1 : 0);
  d.w = x.dim(d.batched ? 2 : 1);
  d.cin = x.dim(-1);
  d.kh = w.dim(0);
  d.kw = w.dim(1);
  d.cout = w.dim(3);
  if (w.dim(2) != d.cin) {
    throw ShapeError(msg("conv2d: input channels ", d.cin, " vs kernel ", w.dim(2)));
  }
  d.stride = stride;
  d.pad = pad;
  d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
  if (d.h + 2 * pad < d.kh || d.w + 2 * pad < d.kw) {
    throw ShapeError(msg("conv2d: kernel ", d.kh, "x", d.kw, " larger than padded input ",
                         d.h + 2 * pad, "x", d.w + 2 * pad));
  }
  return d;
}

// col has one row per output position, K = kh*kw*cin entries each.
void im2col(const double* x, const ConvDims& d, double* col) {
  const int64_t k = d.kh * d.kw * d.cin;
  for (int64_t oy = 0; oy < d.ho; ++oy) {
    for (int64_t ox = 0; ox < d.wo; ++ox) {
      double* row = col + (oy * d.wo + ox) * k;
      for (int64_t ky = 0; ky < d.kh; ++ky) {
        const int64_t iy = oy * d.stride + ky - d.pad;
        double* dst = row + ky * d.kw * d.cin;
        if (iy < 0 || iy >= d.h) {
          std::fill(dst, dst + d.kw * d.cin, 0.0);
          continue;
        }
        for (int64_t kx = 0; kx < d.kw; ++kx) {
          const int64_t ix = ox * d.stride + kx - d.pad;
          if (ix < 0 || ix >= d.w) {
            std::fill(dst + kx * d.cin, dst + (kx + 1) * d.cin, 0.0);
          } else {
            const double* src = x + (iy * d.w + ix) * d.cin;
            std::copy(src, src + d.cin, dst + kx * d.cin);
          }
        }
      }
    }
  }
}

void col2im_accum(const double* col, const ConvDims& d, double* dx) {
  const int64_t k = d.kh * d.kw * d.cin;
  for (int64_t oy = 0; oy < d.ho; ++oy) {
    for (int64_t ox = 0; ox < d.wo; ++ox) {
      const double* row = col + (oy * d.wo + ox) * k;
      for (int64_t ky = 0; ky < d.kh; ++ky) {
        const int64_t iy = oy * d.stride + ky - d.pad;
        if (iy < 0 || iy >= d.h) continue;
        for (int64_t kx = 0; kx < d.kw; ++kx) {
          const int64_t ix = ox * d.stride + kx - d.pad;
          if (ix < 0 || ix >= d.w) continue;
          const double* src = row + (ky * d.kw + kx) * d.cin;
          double* dst = dx + (iy * d.w + ix) * d.cin;
          for (int64_t c = 0; c < d.cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

Tensor conv2d_impl(const Tensor& x, const Tensor& w, const Tensor* bias,
                   int64_t stride, int64_t pad) {
  const ConvDims d = conv_dims(x, w, stride, pad);
  if (bias && bias->numel() != d.cout) {
    throw ShapeError(msg("conv2d: bias length ", bias->numel(), " vs ", d.cout, " filters"));
  }
  const int64_t k = d.kh * d.kw * d.cin;
  const int64_t p = d.ho * d.wo;
  const int64_t in_stride = d.h * d.w * d.cin;
  const int64_t out_stride = p * d.cout;

  std::vector<double> out(static_cast<size_t>(d.n * out_stride), 0.0);
  std::vector<double> col(static_cast<size_t>(p * k));
  for (int64_t s = 0; s < d.n; ++s) {
    im2col(x.values().data() + s * in_stride, d, col.data());
    gemm_nn(col.data(), w.values().data(), out.data() + s * out_stride, p, k, d.cout);
  }
  if (bias) {
    const auto bv = bias->values();
    for (int64_t s = 0; s < d.n; ++s) {
      double* o = out.data() + s * out_stride;
      for (int64_t i = 0; i < p; ++i) {
        for (int64_t c = 0; c < d.cout; ++c) o[i * d.cout + c] += bv[static_cast<size_t>(c)];
      }
    }
  }

  Shape out_shape = d.batched ? Shape{d.n, d.ho, d.wo, d.cout} : Shape{d.ho, d.wo, d.cout};
  const bool rg = bias ? track(x, w, *bias) : track(x, w);
  Tensor result = make_result(std::move(out_shape), std::move(out), rg, "conv2d");
  if (!result.requires_grad()) return result;

  auto xn = x.node(), wn = w.node(), on = result.node();
  auto bn = bias ? bias->node() : nullptr;
  tape().record({"conv2d", on, [xn, wn, bn, on, d, k, p, in_stride, out_stride]() {
    if (wn->requires_grad) wn->ensure_grad();
    if (xn->requires_grad) xn->ensure_grad();
    if (bn && bn->requires_grad) bn->ensure_grad();
    std::vector<double> col;
    std::vector<double> dcol;
    if (wn->requires_grad) col.resize(static_cast<size_t>(p * k));
    if (xn->requires_grad) dcol.resize(static_cast<size_t>(p * k));
    for (int64_t s = 0; s < d.n; ++s) {
      const double* g = on->grad.data() + s * out_stride;
      if (wn->requires_grad) {
        im2col(xn->values.data() + s * in_stride, d, col.data());
        gemm_tn(col.data(), g, wn->grad.data(), k, p, d.cout);
      }
      if (xn->requires_grad) {
        std::fill(dcol.begin(), dcol.end(), 0.0);
        gemm_nt(g, wn->values.data(), dcol.data(), p, d.cout, k);
        col2im_accum(dcol.data(), d, xn->grad.data() + s * in_stride);
      }
      if (bn && bn->requires_grad) {
        for (int64_t i = 0; i < p; ++i) {
          for (int64_t c = 0; c < d.cout; ++c) bn->grad[static_cast<size_t>(c)] += g[i * d.cout + c];
        }
      }
    }
  }});
  return result;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int64_t stride, int64_t pad) {
  return conv2d_impl(x, w, &bias, stride, pad);
}

Tensor conv2d(const Tensor& x, const Tensor& w, int64_t stride, int64_t pad) {
  return conv2d_impl(x, w, nullptr, stride, pad);
}

Tensor avg_pool2(const Tensor& x) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw ShapeError(msg("avg_pool2: input must be (H,W,C) or (N,H,W,C), got ", shape_str(x.shape())));
  }
  const bool batched = x.rank() == 4;
  const int64_t n = batched ? x.dim(0) : 1;
  const int64_t h = x.dim(batched ? 1 : 0);
  const int64_t w = x.dim(batched ? 2 : 1);
  const int64_t c = x.dim(-1);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError(msg("avg_pool2: spatial dims must be even, got ", h, "x", w));
  }
  const int64_t ho = h / 2, wo = w / 2;
  const auto xv = x.values();
  std::vector<double> out(static_cast<size_t>(n * ho * wo * c));
  for (int64_t s = 0; s < n; ++s) {
    const double* xs = xv.data() + s * h * w * c;
    double* os = out.data() + s * ho * wo * c;
    for (int64_t oy = 0; oy < ho; ++oy) {
      for (int64_t ox = 0; ox < wo; ++ox) {
        const double* p00 = xs + ((2 * oy) * w + 2 * ox) * c;
        const double* p01 = p00 + c;
        const double* p10 = p00 + w * c;
        const double* p11 = p10 + c;
        double* o = os + (oy * wo + ox) * c;
        for (int64_t ch = 0; ch < c; ++ch) {
          o[ch] = 0.25 * (p00[ch] + p01[ch] + p10[ch] + p11[ch]);
        }
      }
    }
  }
  Shape out_shape = batched ? Shape{n, ho, wo, c} : Shape{ho, wo, c};
  Tensor result = make_result(std::move(out_shape), std::move(out), track(x), "avg_pool2");
  if (!result.requires_grad()) return result;
  auto xn = x.node(), on = result.node();
  tape().record({"avg_pool2", on, [xn, on, n, h, w, c, ho, wo]() {
    xn->ensure_grad();
    for (int64_t s = 0; s < n; ++s) {
      const double* gs = on->grad.data() + s * ho * wo * c;
      double* dx = xn->grad.data() + s * h * w * c;
      for (int64_t oy = 0; oy < ho; ++oy) {
        for (int64_t ox = 0; ox < wo; ++ox) {
          const double* g = gs + (oy * wo + ox) * c;
          double* p00 = dx + ((2 * oy) * w + 2 * ox) * c;
          double* p01 = p00 + c;
          double* p10 = p00 + w * c;
          double* p11 = p10 + c;
          for (int64_t ch = 0; ch < c; ++ch) {
            const double gq = 0.25 * g[ch];
            p00[ch] += gq;
            p01[ch] += gq;
            p10[ch] += gq;
            p11[ch] += gq;
          }
        }
      }
    }
  }});
  return result;
}

Tensor upsample_nearest2(const Tensor& x) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw ShapeError(msg("upsample_nearest2: input must be (H,W,C) or (N,H,W,C), got ",
                         shape_str(x.shape())));
  }
  const bool batched = x.rank() == 4;
  const int64_t n = batched ? x.dim(0) : 1;
  const int64_t h = x.dim(batched ? 1 : 0);
  const int64_t w = x.dim(batched ? 2 : 1);
  const int64_t c = x.dim(-1);
  const int64_t ho = h * 2, wo = w * 2;
  const auto xv = x.values();
  std::vector<double> out(static_cast<size_t>(n * ho * wo * c));
  for (int64_t s = 0; s < n; ++s) {
    const double* xs = xv.data() + s * h * w * c;
    double* os = out.data() + s * ho * wo * c;
    for (int64_t y = 0; y < ho; ++y) {
      const double* xrow = xs + (y / 2) * w * c;
      double* orow = os + y * wo * c;
      for (int64_t xcol = 0; xcol < wo; ++xcol) {
        const double* src = xrow + (xcol / 2) * c;
        double* dst = orow + xcol * c;
        std::copy(src, src + c, dst);
      }
    }
  }
  Shape out_shape = batched ? Shape{n, ho, wo, c} : Shape{ho, wo, c};
  Tensor result = make_result(std::move(out_shape), std::move(out), track(x), "upsample_nearest2");
  if (!result.requires_grad()) return result;
  auto xn = x.node(), on = result.node();
  tape().record({"upsample_nearest2", on, [xn, on, n, h, w, c, ho, wo]() {
    xn->ensure_grad();
    for (int64_t s = 0; s < n; ++s) {
      const double* gs = on->grad.data() + s * ho * wo * c;
      double* dx = xn->grad.data() + s * h * w * c;
      for (int64_t y = 0; y < ho; ++y) {
        const double* grow = gs + y * wo * c;
        double* xrow = dx + (y / 2) * w * c;
        for (int64_t xcol = 0; xcol < wo; ++xcol) {
          const double* g = grow + xcol * c;
          double* dst = xrow + (xcol / 2) * c;
          for (int64_t ch = 0; ch < c; ++ch) dst[ch] += g[ch];
        }
      }
    }
  }});
  return result;
}

}  // namespace frt
