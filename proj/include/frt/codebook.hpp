#pragma once

#include <cstdint>
#include <vector>

#include "frt/tensor.hpp"

namespace frt {

// The trainable prior dictionary: M rows of length C. Entries receive
// gradients only through the dictionary-loss path.
struct Codebook {
  Tensor entries;  // (M, C)

  int64_t size() const { return entries.dim(0); }
  int64_t dim() const { return entries.dim(1); }

  // Rows i.i.d. uniform on [-1/M, 1/M], deterministic per seed.
  static Codebook init(int64_t m, int64_t c, uint64_t seed);
};

struct QuantizationResult {
  Tensor z_p;                    // same shape as the input, rows copied from entries
  std::vector<int64_t> indices;  // argmin entry per position
  std::vector<double> distances; // squared L2 to the selected entry
};

// Nearest-entry replacement per position. Input is (..., C); distances use
// the expanded form |z|^2 - 2 z.d + |d|^2 with cached entry norms. Ties pick
// the lowest index. No gradient flows through the argmin; z_p is
// differentiable into the codebook entries only.
QuantizationResult quantize(const Tensor& z, const Codebook& book);

struct DictLosses {
  Tensor dictionary;  // || sg[z_h] - z_p ||^2, mean-reduced; updates entries
  Tensor commitment;  // || z_h - sg[z_p] ||^2, mean-reduced; updates encoder
};
DictLosses dict_losses(const Tensor& z_h, const Tensor& z_p);

std::vector<int64_t> usage_histogram(const std::vector<int64_t>& indices, int64_t m);
int64_t distinct_entries(const std::vector<int64_t>& indices);

}  // namespace frt
