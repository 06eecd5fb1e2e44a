#pragma once

#include <string>

#include "frt/optim.hpp"
#include "frt/rng.hpp"
#include "frt/tensor.hpp"

namespace frt {

// Which tensor the block adds to the attended features before LN/FFN.
// Cross-attention defaults to the prior; kQuery reproduces the ablation
// variant that fuses with the degraded features instead.
enum class ResidualSource { kPrior, kQuery };

// kPassThrough skips LN and the FFN; a hook for tests and ablations.
enum class BlockMode { kFull, kPassThrough };

struct AttentionParams {
  Tensor w_q, b_q;
  Tensor w_k, b_k;
  Tensor w_v, b_v;
  Tensor w_o, b_o;          // output projection after head concat
  Tensor ln_gain, ln_bias;
  Tensor ffn_w1, ffn_b1;    // 3x3 conv
  Tensor ffn_w2, ffn_b2;    // 3x3 conv
  int64_t heads = 1;
  int64_t channels = 0;

  static AttentionParams init(int64_t channels, int64_t heads, Rng& rng);
  void register_in(ParamStore& store, const std::string& prefix) const;
};

// Scaled dot-product attention over flattened positions.
// q: (L_q, C); k, v: (L_kv, C). Returns (L_q, C); weights (heads, L_q, L_kv).
struct AttendResult {
  Tensor output;
  Tensor weights;
};
AttendResult attend_with_weights(const Tensor& q, const Tensor& k, const Tensor& v,
                                 int64_t heads);
Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, int64_t heads);

// Transformer blocks over spatial maps (H', W', C).
struct BlockResult {
  Tensor output;
  Tensor weights;
};

BlockResult mhsa_block_full(const Tensor& z, const AttentionParams& params,
                            BlockMode mode = BlockMode::kFull);
BlockResult mhca_block_full(const Tensor& z_query, const Tensor& z_prior,
                            const AttentionParams& params,
                            BlockMode mode = BlockMode::kFull,
                            ResidualSource residual = ResidualSource::kPrior);

Tensor mhsa_block(const Tensor& z, const AttentionParams& params,
                  BlockMode mode = BlockMode::kFull);
Tensor mhca_block(const Tensor& z_query, const Tensor& z_prior,
                  const AttentionParams& params, BlockMode mode = BlockMode::kFull,
                  ResidualSource residual = ResidualSource::kPrior);

}  // namespace frt
