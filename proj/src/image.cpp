#include "frt/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace frt {

Image Image::zeros(int64_t h, int64_t w, int64_t c) {
  if (h < 1 || w < 1 || (c != 1 && c != 3)) {
    throw Error(msg("Image::zeros: bad dims ", h, "x", w, "x", c));
  }
  Image img;
  img.height = h;
  img.width = w;
  img.channels = c;
  img.data.assign(static_cast<size_t>(h * w * c), 0.0);
  return img;
}

namespace {

int read_ppm_token(std::ifstream& in) {
  // skips whitespace and '#' comments
  while (true) {
    int ch = in.get();
    if (ch == '#') {
      while (ch != '\n' && ch != EOF) ch = in.get();
    } else if (!std::isspace(ch)) {
      int value = 0;
      bool any = false;
      while (std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        ch = in.get();
        any = true;
      }
      if (!any) return -1;
      return value;
    } else if (ch == EOF) {
      return -1;
    }
  }
}

}  // namespace

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(msg("read_ppm: cannot open ", path));
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '6') throw IoError(msg("read_ppm: ", path, " is not binary P6"));
  const int w = read_ppm_token(in);
  const int h = read_ppm_token(in);
  const int maxval = read_ppm_token(in);
  if (w < 1 || h < 1 || maxval != 255) {
    throw IoError(msg("read_ppm: unsupported header in ", path, " (need maxval 255)"));
  }
  // header token reader consumed the single whitespace after maxval
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw IoError(msg("read_ppm: truncated pixel data in ", path));
  }
  Image img = Image::zeros(h, w, 3);
  for (size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

void write_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(msg("write_ppm: cannot open ", path, " for writing"));
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(static_cast<size_t>(img.pixels()) * 3);
  size_t k = 0;
  for (int64_t p = 0; p < img.pixels(); ++p) {
    for (int64_t c = 0; c < 3; ++c) {
      const int64_t ch = img.channels == 1 ? 0 : c;
      double v = img.data[static_cast<size_t>(p * img.channels + ch)];
      v = std::clamp(v, 0.0, 1.0);
      raw[k++] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError(msg("write_ppm: failed writing ", path));
}

Tensor image_to_tensor(const Image& img) {
  return Tensor::from_data({img.height, img.width, img.channels}, img.data);
}

Image tensor_to_image(const Tensor& t) {
  if (t.rank() != 3) throw ShapeError(msg("tensor_to_image: need (H,W,C), got ", shape_str(t.shape())));
  Image img = Image::zeros(t.dim(0), t.dim(1), t.dim(2));
  img.data.assign(t.values().begin(), t.values().end());
  return img;
}

namespace {

struct Tap {
  int64_t lo;
  int64_t hi;
  double frac;  // weight of hi
};

Tap make_tap(double src, int64_t limit) {
  src = std::clamp(src, 0.0, static_cast<double>(limit - 1));
  const double fl = std::floor(src);
  Tap t;
  t.lo = static_cast<int64_t>(fl);
  t.hi = std::min(t.lo + 1, limit - 1);
  t.frac = src - fl;
  return t;
}

}  // namespace

Image bilinear_resize(const Image& img, int64_t out_h, int64_t out_w) {
  if (out_h < 1 || out_w < 1) throw Error("bilinear_resize: bad output size");
  Image out = Image::zeros(out_h, out_w, img.channels);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  for (int64_t y = 0; y < out_h; ++y) {
    const Tap ty = make_tap((y + 0.5) * sy - 0.5, img.height);
    for (int64_t x = 0; x < out_w; ++x) {
      const Tap tx = make_tap((x + 0.5) * sx - 0.5, img.width);
      for (int64_t c = 0; c < img.channels; ++c) {
        const double v00 = img.at(ty.lo, tx.lo, c);
        const double v01 = img.at(ty.lo, tx.hi, c);
        const double v10 = img.at(ty.hi, tx.lo, c);
        const double v11 = img.at(ty.hi, tx.hi, c);
        const double top = v00 * (1.0 - tx.frac) + v01 * tx.frac;
        const double bot = v10 * (1.0 - tx.frac) + v11 * tx.frac;
        out.at(y, x, c) = top * (1.0 - ty.frac) + bot * ty.frac;
      }
    }
  }
  return out;
}

Tensor crop_resize_bilinear(const Tensor& x, const Box& box, int64_t out_h, int64_t out_w) {
  if (x.rank() != 3) {
    throw ShapeError(msg("crop_resize_bilinear: need (H,W,C), got ", shape_str(x.shape())));
  }
  if (box.w <= 0.0 || box.h <= 0.0) {
    throw Error(msg("crop_resize_bilinear: degenerate box ", box.w, "x", box.h));
  }
  if (out_h < 1 || out_w < 1) throw Error("crop_resize_bilinear: bad output size");
  const int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);

  // Sampling grid of the sub-image [box.y*H, (box.y+box.h)*H) x [...W...),
  // resized to out_h x out_w with half-pixel centers.
  const double sy = box.h * static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = box.w * static_cast<double>(w) / static_cast<double>(out_w);
  const double oy = box.y * static_cast<double>(h);
  const double ox = box.x * static_cast<double>(w);

  std::vector<Tap> ys(static_cast<size_t>(out_h)), xs(static_cast<size_t>(out_w));
  for (int64_t y = 0; y < out_h; ++y) ys[static_cast<size_t>(y)] = make_tap(oy + (y + 0.5) * sy - 0.5, h);
  for (int64_t xq = 0; xq < out_w; ++xq) xs[static_cast<size_t>(xq)] = make_tap(ox + (xq + 0.5) * sx - 0.5, w);

  const auto xv = x.values();
  std::vector<double> out(static_cast<size_t>(out_h * out_w * c));
  for (int64_t y = 0; y < out_h; ++y) {
    const Tap& ty = ys[static_cast<size_t>(y)];
    for (int64_t xq = 0; xq < out_w; ++xq) {
      const Tap& tx = xs[static_cast<size_t>(xq)];
      const double w00 = (1.0 - ty.frac) * (1.0 - tx.frac);
      const double w01 = (1.0 - ty.frac) * tx.frac;
      const double w10 = ty.frac * (1.0 - tx.frac);
      const double w11 = ty.frac * tx.frac;
      const double* p00 = xv.data() + (ty.lo * w + tx.lo) * c;
      const double* p01 = xv.data() + (ty.lo * w + tx.hi) * c;
      const double* p10 = xv.data() + (ty.hi * w + tx.lo) * c;
      const double* p11 = xv.data() + (ty.hi * w + tx.hi) * c;
      double* o = out.data() + (y * out_w + xq) * c;
      for (int64_t ch = 0; ch < c; ++ch) {
        o[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
      }
    }
  }

  Tensor result = detail::make_result({out_h, out_w, c}, std::move(out),
                                      detail::track(x), "crop_resize_bilinear");
  if (!result.requires_grad()) return result;
  auto xn = x.node(), on = result.node();
  tape().record({"crop_resize_bilinear", on, [xn, on, ys, xs, w, c, out_w]() {
    xn->ensure_grad();
    const int64_t out_h = static_cast<int64_t>(ys.size());
    for (int64_t y = 0; y < out_h; ++y) {
      const Tap& ty = ys[static_cast<size_t>(y)];
      for (int64_t xq = 0; xq < out_w; ++xq) {
        const Tap& tx = xs[static_cast<size_t>(xq)];
        const double w00 = (1.0 - ty.frac) * (1.0 - tx.frac);
        const double w01 = (1.0 - ty.frac) * tx.frac;
        const double w10 = ty.frac * (1.0 - tx.frac);
        const double w11 = ty.frac * tx.frac;
        const double* g = on->grad.data() + (y * out_w + xq) * c;
        for (int64_t ch = 0; ch < c; ++ch) {
          xn->grad[static_cast<size_t>((ty.lo * w + tx.lo) * c + ch)] += w00 * g[ch];
          xn->grad[static_cast<size_t>((ty.lo * w + tx.hi) * c + ch)] += w01 * g[ch];
          xn->grad[static_cast<size_t>((ty.hi * w + tx.lo) * c + ch)] += w10 * g[ch];
          xn->grad[static_cast<size_t>((ty.hi * w + tx.hi) * c + ch)] += w11 * g[ch];
        }
      }
    }
  }});
  return result;
}

double luminance(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image out = Image::zeros(img.height, img.width, 1);
  for (int64_t p = 0; p < img.pixels(); ++p) {
    out.data[static_cast<size_t>(p)] =
        luminance(img.data[static_cast<size_t>(p * 3)], img.data[static_cast<size_t>(p * 3 + 1)],
                  img.data[static_cast<size_t>(p * 3 + 2)]);
  }
  return out;
}

}  // namespace frt
