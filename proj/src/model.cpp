#include "frt/model.hpp"

#include <cmath>

namespace frt {

std::vector<int64_t> ModelConfig::widths() const {
  std::vector<int64_t> w(5);
  for (int i = 0; i < 5; ++i) {
    w[static_cast<size_t>(i)] = std::min(base_channels << i, channel_cap);
  }
  return w;
}

int64_t norm_groups(int64_t channels) { return std::min<int64_t>(32, channels); }

ConvParams ConvParams::init(int64_t kh, int64_t kw, int64_t cin, int64_t cout, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(kh * kw * cin));
  ConvParams p;
  p.w = Tensor::rand_normal({kh, kw, cin, cout}, rng, 0.0, stddev);
  p.b = Tensor::zeros({cout});
  return p;
}

ResBlockParams ResBlockParams::init(int64_t cin, int64_t cout, Rng& rng) {
  ResBlockParams p;
  p.norm1_gain = Tensor::full({cin}, 1.0);
  p.norm1_bias = Tensor::zeros({cin});
  p.conv1 = ConvParams::init(3, 3, cin, cout, rng);
  p.norm2_gain = Tensor::full({cout}, 1.0);
  p.norm2_bias = Tensor::zeros({cout});
  p.conv2 = ConvParams::init(3, 3, cout, cout, rng);
  if (cin != cout) p.skip = ConvParams::init(1, 1, cin, cout, rng);
  return p;
}

Tensor res_block(const Tensor& x, const ResBlockParams& p) {
  const int64_t cin = x.dim(-1);
  Tensor h = silu(group_norm(x, p.norm1_gain, p.norm1_bias, norm_groups(cin)));
  h = conv2d(h, p.conv1.w, p.conv1.b, 1, 1);
  const int64_t cout = h.dim(-1);
  h = silu(group_norm(h, p.norm2_gain, p.norm2_bias, norm_groups(cout)));
  h = conv2d(h, p.conv2.w, p.conv2.b, 1, 1);
  Tensor shortcut = p.skip ? conv2d(x, p.skip->w, p.skip->b, 1, 0) : x;
  return add(h, shortcut);
}

namespace {

void register_block(ParamStore& store, const std::string& prefix, const ResBlockParams& b) {
  store.add(prefix + ".norm1.gain", b.norm1_gain);
  store.add(prefix + ".norm1.bias", b.norm1_bias);
  store.add(prefix + ".conv1.weight", b.conv1.w);
  store.add(prefix + ".conv1.bias", b.conv1.b);
  store.add(prefix + ".norm2.gain", b.norm2_gain);
  store.add(prefix + ".norm2.bias", b.norm2_bias);
  store.add(prefix + ".conv2.weight", b.conv2.w);
  store.add(prefix + ".conv2.bias", b.conv2.b);
  if (b.skip) {
    store.add(prefix + ".skip.weight", b.skip->w);
    store.add(prefix + ".skip.bias", b.skip->b);
  }
}

void check_image_input(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw ShapeError(msg("encode: expected (H, W, 3), got ", shape_str(image.shape())));
  }
  const int64_t h = image.dim(0), w = image.dim(1);
  if (h % 32 != 0 || w % 32 != 0) {
    throw ShapeError(msg("encode: image dims ", h, "x", w, " not divisible by 32"));
  }
  // slack covers finite-difference probes of the pipeline
  for (double v : image.values()) {
    if (v < -1e-3 || v > 1.0 + 1e-3) {
      throw Error(msg("encode: pixel value ", v, " outside [0, 1]"));
    }
  }
}

}  // namespace

EncoderParams EncoderParams::init(const ModelConfig& cfg, Rng& rng) {
  const auto w = cfg.widths();
  EncoderParams p;
  p.stem = ConvParams::init(3, 3, 3, w[0], rng);
  int64_t prev = w[0];
  for (int level = 0; level < 5; ++level) {
    p.blocks.push_back(ResBlockParams::init(prev, w[static_cast<size_t>(level)], rng));
    p.blocks.push_back(ResBlockParams::init(w[static_cast<size_t>(level)],
                                            w[static_cast<size_t>(level)], rng));
    prev = w[static_cast<size_t>(level)];
  }
  p.blocks.push_back(ResBlockParams::init(prev, prev, rng));  // mid
  p.blocks.push_back(ResBlockParams::init(prev, prev, rng));  // mid
  p.head_norm_gain = Tensor::full({prev}, 1.0);
  p.head_norm_bias = Tensor::zeros({prev});
  p.head = ConvParams::init(3, 3, prev, cfg.latent_channels, rng);
  return p;
}

void EncoderParams::register_in(ParamStore& store, const std::string& prefix) const {
  store.add(prefix + ".stem.weight", stem.w);
  store.add(prefix + ".stem.bias", stem.b);
  for (size_t i = 0; i < blocks.size(); ++i) {
    register_block(store, prefix + ".block" + std::to_string(i), blocks[i]);
  }
  store.add(prefix + ".head_norm.gain", head_norm_gain);
  store.add(prefix + ".head_norm.bias", head_norm_bias);
  store.add(prefix + ".head.weight", head.w);
  store.add(prefix + ".head.bias", head.b);
}

Tensor encode(const Tensor& image, const EncoderParams& p) {
  check_image_input(image);
  Tensor h = conv2d(image, p.stem.w, p.stem.b, 1, 1);
  size_t bi = 0;
  for (int level = 0; level < 5; ++level) {
    h = res_block(h, p.blocks[bi++]);
    h = res_block(h, p.blocks[bi++]);
    h = avg_pool2(h);
  }
  h = res_block(h, p.blocks[bi++]);
  h = res_block(h, p.blocks[bi++]);
  h = silu(group_norm(h, p.head_norm_gain, p.head_norm_bias, norm_groups(h.dim(-1))));
  return conv2d(h, p.head.w, p.head.b, 1, 1);
}

DecoderParams DecoderParams::init(const ModelConfig& cfg, Rng& rng) {
  const auto w = cfg.widths();
  DecoderParams p;
  p.stem = ConvParams::init(3, 3, cfg.latent_channels, w[4], rng);
  p.blocks.push_back(ResBlockParams::init(w[4], w[4], rng));  // mid
  p.blocks.push_back(ResBlockParams::init(w[4], w[4], rng));  // mid
  int64_t prev = w[4];
  for (int level = 4; level >= 0; --level) {
    p.blocks.push_back(ResBlockParams::init(prev, w[static_cast<size_t>(level)], rng));
    p.blocks.push_back(ResBlockParams::init(w[static_cast<size_t>(level)],
                                            w[static_cast<size_t>(level)], rng));
    prev = w[static_cast<size_t>(level)];
  }
  p.head_norm_gain = Tensor::full({prev}, 1.0);
  p.head_norm_bias = Tensor::zeros({prev});
  p.head = ConvParams::init(3, 3, prev, 3, rng);
  return p;
}

void DecoderParams::register_in(ParamStore& store, const std::string& prefix) const {
  store.add(prefix + ".stem.weight", stem.w);
  store.add(prefix + ".stem.bias", stem.b);
  for (size_t i = 0; i < blocks.size(); ++i) {
    register_block(store, prefix + ".block" + std::to_string(i), blocks[i]);
  }
  store.add(prefix + ".head_norm.gain", head_norm_gain);
  store.add(prefix + ".head_norm.bias", head_norm_bias);
  store.add(prefix + ".head.weight", head.w);
  store.add(prefix + ".head.bias", head.b);
}

Tensor decode(const Tensor& latent, const DecoderParams& p) {
  if (latent.rank() != 3) {
    throw ShapeError(msg("decode: expected (h, w, C), got ", shape_str(latent.shape())));
  }
  Tensor h = conv2d(latent, p.stem.w, p.stem.b, 1, 1);
  size_t bi = 0;
  h = res_block(h, p.blocks[bi++]);
  h = res_block(h, p.blocks[bi++]);
  for (int level = 4; level >= 0; --level) {
    h = upsample_nearest2(h);
    h = res_block(h, p.blocks[bi++]);
    h = res_block(h, p.blocks[bi++]);
  }
  h = silu(group_norm(h, p.head_norm_gain, p.head_norm_bias, norm_groups(h.dim(-1))));
  h = conv2d(h, p.head.w, p.head.b, 1, 1);
  // scaled tanh into [0,1]: 0.5*(tanh(y)+1) == sigmoid(2y)
  return sigmoid(scale(h, 2.0));
}

HqgenOutputs hqgen_forward(const Tensor& image, const EncoderParams& enc,
                           const DecoderParams& dec, const Codebook& book) {
  HqgenOutputs out;
  out.z_h = encode(image, enc);
  QuantizationResult q = quantize(out.z_h, book);
  out.z_p = q.z_p;
  out.indices = std::move(q.indices);
  Tensor decoder_input = straight_through(out.z_h, out.z_p);
  out.reconstruction = decode(decoder_input, dec);
  return out;
}

RestoreOutputs restore_forward(const Tensor& image, const EncoderParams& enc,
                               const DecoderParams& dec, const Codebook& book,
                               const AttentionParams& mhca1, const AttentionParams& mhca2,
                               BlockMode mode, ResidualSource residual) {
  RestoreOutputs out;
  out.z_d = encode(image, enc);
  QuantizationResult q = quantize(out.z_d, book);
  out.z_p = q.z_p;
  out.indices = std::move(q.indices);
  BlockResult first = mhca_block_full(out.z_d, out.z_p, mhca1, mode, residual);
  BlockResult second = mhca_block_full(out.z_d, first.output, mhca2, mode, residual);
  out.attention1 = first.weights;
  out.attention2 = second.weights;
  out.z_fused = second.output;
  out.restoration = decode(out.z_fused, dec);
  return out;
}

}  // namespace frt
