#include "frt/codebook.hpp"

#include <algorithm>

#include "frt/rng.hpp"

namespace frt {

Codebook Codebook::init(int64_t m, int64_t c, uint64_t seed) {
  if (m < 2) throw Error(msg("Codebook::init: need at least 2 entries, got ", m));
  if (c < 1) throw Error(msg("Codebook::init: entry length must be >= 1, got ", c));
  Rng rng(seed);
  const double bound = 1.0 / static_cast<double>(m);
  Codebook book;
  book.entries = Tensor::rand_uniform({m, c}, rng, -bound, bound);
  return book;
}

QuantizationResult quantize(const Tensor& z, const Codebook& book) {
  const int64_t c = book.dim();
  if (z.rank() < 1 || z.dim(-1) != c) {
    throw ShapeError(msg("quantize: input channels ", shape_str(z.shape()),
                         " vs codebook entry length ", c));
  }
  const int64_t m = book.size();
  const int64_t positions = z.numel() / c;
  const auto zv = z.values();
  const auto ev = book.entries.values();

  std::vector<double> entry_norms(static_cast<size_t>(m));
  for (int64_t row = 0; row < m; ++row) {
    double acc = 0.0;
    const double* e = ev.data() + row * c;
    for (int64_t j = 0; j < c; ++j) acc += e[j] * e[j];
    entry_norms[static_cast<size_t>(row)] = acc;
  }

  QuantizationResult result;
  result.indices.resize(static_cast<size_t>(positions));
  result.distances.resize(static_cast<size_t>(positions));
  for (int64_t p = 0; p < positions; ++p) {
    const double* zp = zv.data() + p * c;
    double znorm = 0.0;
    for (int64_t j = 0; j < c; ++j) znorm += zp[j] * zp[j];
    double best = 0.0;
    int64_t best_row = -1;
    for (int64_t row = 0; row < m; ++row) {
      const double* e = ev.data() + row * c;
      double dot = 0.0;
      for (int64_t j = 0; j < c; ++j) dot += zp[j] * e[j];
      const double dist = znorm - 2.0 * dot + entry_norms[static_cast<size_t>(row)];
      if (best_row < 0 || dist < best) {  // strict <: ties keep the lowest index
        best = dist;
        best_row = row;
      }
    }
    result.indices[static_cast<size_t>(p)] = best_row;
    result.distances[static_cast<size_t>(p)] = best;
  }

  result.z_p = reshape(gather_rows(book.entries, result.indices), z.shape());
  return result;
}

DictLosses dict_losses(const Tensor& z_h, const Tensor& z_p) {
  if (z_h.shape() != z_p.shape()) {
    throw ShapeError(msg("dict_losses: shapes ", shape_str(z_h.shape()), " and ",
                         shape_str(z_p.shape()), " differ"));
  }
  DictLosses losses;
  losses.dictionary = sq_l2_mean(detach(z_h), z_p);
  losses.commitment = sq_l2_mean(z_h, detach(z_p));
  return losses;
}

std::vector<int64_t> usage_histogram(const std::vector<int64_t>& indices, int64_t m) {
  std::vector<int64_t> hist(static_cast<size_t>(m), 0);
  for (int64_t idx : indices) {
    if (idx < 0 || idx >= m) throw Error(msg("usage_histogram: index ", idx, " out of range"));
    ++hist[static_cast<size_t>(idx)];
  }
  return hist;
}

int64_t distinct_entries(const std::vector<int64_t>& indices) {
  std::vector<int64_t> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  return static_cast<int64_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

}  // namespace frt
