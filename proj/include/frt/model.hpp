#pragma once

#include <optional>
#include <string>
#include <vector>

#include "frt/attention.hpp"
#include "frt/codebook.hpp"
#include "frt/optim.hpp"
#include "frt/rng.hpp"
#include "frt/tensor.hpp"

namespace frt {

// Structural hyperparameters shared by encoder and decoder. Five resolution
// halvings end to end, so image_size must divide by 32; the latent map is
// (image_size/32)^2 x latent_channels.
struct ModelConfig {
  int64_t image_size = 32;
  int64_t base_channels = 16;
  int64_t channel_cap = 32;
  int64_t latent_channels = 32;  // equals the codebook entry length
  int64_t heads = 4;
  // Per-site groups are min(norm_groups, channels). Small configs need few
  // groups: at a 1x1 latent a group must still hold >= 3 values or the
  // normalization saturates and its input gradient vanishes.
  int64_t norm_groups = 32;

  std::vector<int64_t> widths() const;  // channel schedule, 5 levels
  int64_t latent_size() const { return image_size / 32; }
};

struct ConvParams {
  Tensor w, b;
  static ConvParams init(int64_t kh, int64_t kw, int64_t cin, int64_t cout, Rng& rng);
};

// group_norm -> SiLU -> 3x3 conv -> group_norm -> SiLU -> 3x3 conv, plus a
// skip (1x1 conv when the channel count changes).
struct ResBlockParams {
  Tensor norm1_gain, norm1_bias;
  ConvParams conv1;
  Tensor norm2_gain, norm2_bias;
  ConvParams conv2;
  std::optional<ConvParams> skip;
  int64_t groups1 = 1, groups2 = 1;

  static ResBlockParams init(int64_t cin, int64_t cout, Rng& rng, int64_t norm_groups = 32);
};

Tensor res_block(const Tensor& x, const ResBlockParams& p);

int64_t effective_groups(int64_t norm_groups, int64_t channels);

struct EncoderParams {
  ConvParams stem;
  std::vector<ResBlockParams> blocks;  // 10 level blocks + 2 mid
  Tensor head_norm_gain, head_norm_bias;
  ConvParams head;

  static EncoderParams init(const ModelConfig& cfg, Rng& rng);
  void register_in(ParamStore& store, const std::string& prefix = "encoder") const;
};

struct DecoderParams {
  ConvParams stem;
  std::vector<ResBlockParams> blocks;  // 2 mid + 10 level blocks
  Tensor head_norm_gain, head_norm_bias;
  ConvParams head;

  static DecoderParams init(const ModelConfig& cfg, Rng& rng);
  void register_in(ParamStore& store, const std::string& prefix = "decoder") const;
};

// (H, W, 3) in [0,1] -> (H/32, W/32, C)
Tensor encode(const Tensor& image, const EncoderParams& p);
// (H/32, W/32, C) -> (H, W, 3), bounded into [0,1]
Tensor decode(const Tensor& latent, const DecoderParams& p);

// Stage-1 high-quality generation network: encode, quantize, decode through
// the straight-through estimator.
struct HqgenOutputs {
  Tensor reconstruction;  // same shape as the input image
  Tensor z_h;
  Tensor z_p;
  std::vector<int64_t> indices;
};
HqgenOutputs hqgen_forward(const Tensor& image, const EncoderParams& enc,
                           const DecoderParams& dec, const Codebook& book);

// Stage-2 restoration pipeline: encode, fetch priors, fuse with two
// consecutive cross-attention blocks, decode.
struct RestoreOutputs {
  Tensor restoration;
  Tensor z_d;
  Tensor z_p;
  Tensor z_fused;  // output of the second cross-attention block
  std::vector<int64_t> indices;
  Tensor attention1, attention2;  // (heads, L, L) weight maps
};
RestoreOutputs restore_forward(const Tensor& image, const EncoderParams& enc,
                               const DecoderParams& dec, const Codebook& book,
                               const AttentionParams& mhca1, const AttentionParams& mhca2,
                               BlockMode mode = BlockMode::kFull,
                               ResidualSource residual = ResidualSource::kPrior);

}  // namespace frt
