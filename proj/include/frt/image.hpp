#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "frt/tensor.hpp"

namespace frt {

// Plain image buffer, row-major (H, W, C), values nominally in [0, 1].
// Used by the non-differentiable paths (I/O, degradation, metrics).
struct Image {
  int64_t height = 0;
  int64_t width = 0;
  int64_t channels = 0;
  std::vector<double> data;

  static Image zeros(int64_t h, int64_t w, int64_t c);

  double& at(int64_t y, int64_t x, int64_t c) {
    return data[static_cast<size_t>((y * width + x) * channels + c)];
  }
  double at(int64_t y, int64_t x, int64_t c) const {
    return data[static_cast<size_t>((y * width + x) * channels + c)];
  }
  int64_t pixels() const { return height * width; }
};

// Binary PPM (P6, maxval 255). Grayscale images are written with the
// channel replicated. Values are clamped to [0,1] and rounded on write.
Image read_ppm(const std::string& path);
void write_ppm(const Image& img, const std::string& path);

Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

// Bilinear resampling with half-pixel-center alignment:
//   src = (dst + 0.5) * (in_size / out_size) - 0.5, clamped to the border.
// A 4 -> 2 reduction therefore samples at src positions 0.5 and 2.5, i.e.
// each output pixel averages its two source neighbours.
Image bilinear_resize(const Image& img, int64_t out_h, int64_t out_w);

// Normalized axis-aligned box; x/y is the top-left corner.
struct Box {
  double x = 0.0, y = 0.0, w = 1.0, h = 1.0;
};

// Differentiable crop + bilinear resize of a (H, W, C) tensor. Sampling
// grid matches bilinear_resize applied to the sub-image described by `box`.
Tensor crop_resize_bilinear(const Tensor& x, const Box& box, int64_t out_h,
                            int64_t out_w);

double luminance(double r, double g, double b);  // Rec.601
Image to_gray(const Image& img);

}  // namespace frt
