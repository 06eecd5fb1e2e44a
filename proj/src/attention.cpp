#include "frt/attention.hpp"

#include <cmath>

namespace frt {

AttentionParams AttentionParams::init(int64_t channels, int64_t heads, Rng& rng) {
  if (heads < 1 || channels % heads != 0) {
    throw ShapeError(msg("attention: ", channels, " channels not divisible by ",
                         heads, " heads"));
  }
  AttentionParams p;
  p.heads = heads;
  p.channels = channels;
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(channels));
  const double ffn_std = std::sqrt(2.0 / (9.0 * static_cast<double>(channels)));
  p.w_q = Tensor::rand_normal({channels, channels}, rng, 0.0, proj_std);
  p.b_q = Tensor::zeros({channels});
  p.w_k = Tensor::rand_normal({channels, channels}, rng, 0.0, proj_std);
  p.b_k = Tensor::zeros({channels});
  p.w_v = Tensor::rand_normal({channels, channels}, rng, 0.0, proj_std);
  p.b_v = Tensor::zeros({channels});
  p.w_o = Tensor::rand_normal({channels, channels}, rng, 0.0, proj_std);
  p.b_o = Tensor::zeros({channels});
  p.ln_gain = Tensor::full({channels}, 1.0);
  p.ln_bias = Tensor::zeros({channels});
  p.ffn_w1 = Tensor::rand_normal({3, 3, channels, channels}, rng, 0.0, ffn_std);
  p.ffn_b1 = Tensor::zeros({channels});
  p.ffn_w2 = Tensor::rand_normal({3, 3, channels, channels}, rng, 0.0, ffn_std);
  p.ffn_b2 = Tensor::zeros({channels});
  return p;
}

void AttentionParams::register_in(ParamStore& store, const std::string& prefix) const {
  store.add(prefix + ".w_q", w_q);
  store.add(prefix + ".b_q", b_q);
  store.add(prefix + ".w_k", w_k);
  store.add(prefix + ".b_k", b_k);
  store.add(prefix + ".w_v", w_v);
  store.add(prefix + ".b_v", b_v);
  store.add(prefix + ".w_o", w_o);
  store.add(prefix + ".b_o", b_o);
  store.add(prefix + ".ln.gain", ln_gain);
  store.add(prefix + ".ln.bias", ln_bias);
  store.add(prefix + ".ffn.conv1.weight", ffn_w1);
  store.add(prefix + ".ffn.conv1.bias", ffn_b1);
  store.add(prefix + ".ffn.conv2.weight", ffn_w2);
  store.add(prefix + ".ffn.conv2.bias", ffn_b2);
}

AttendResult attend_with_weights(const Tensor& q, const Tensor& k, const Tensor& v,
                                 int64_t heads) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw ShapeError("attend: q/k/v must be rank 2 (positions, channels)");
  }
  const int64_t c = q.dim(1);
  if (heads < 1 || c % heads != 0) {
    throw ShapeError(msg("attend: ", c, " channels not divisible by ", heads, " heads"));
  }
  if (k.dim(1) != c || v.dim(1) != c) {
    throw ShapeError(msg("attend: channel mismatch q", shape_str(q.shape()), " k",
                         shape_str(k.shape()), " v", shape_str(v.shape())));
  }
  if (k.dim(0) != v.dim(0)) {
    throw ShapeError("attend: k and v must have the same number of rows");
  }
  if (q.dim(0) < 1 || k.dim(0) < 1) throw ShapeError("attend: empty q or k/v");

  const int64_t lq = q.dim(0), lkv = k.dim(0), ch = c / heads;

  // (L, C) -> (heads, L, C_h)
  auto to_heads = [&](const Tensor& t, int64_t l) {
    return transpose(reshape(t, {l, heads, ch}), 0, 1);
  };
  Tensor qh = to_heads(q, lq);
  Tensor kh = to_heads(k, lkv);
  Tensor vh = to_heads(v, lkv);

  Tensor scores = scale(matmul(qh, transpose(kh, 1, 2)),
                        1.0 / std::sqrt(static_cast<double>(ch)));
  Tensor weights = softmax(scores, -1);
  Tensor attended = matmul(weights, vh);  // (heads, L_q, C_h)
  Tensor out = reshape(transpose(attended, 0, 1), {lq, c});
  return {out, weights};
}

Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, int64_t heads) {
  return attend_with_weights(q, k, v, heads).output;
}

namespace {

// Shared body: self-attention is cross-attention with the query map as the
// key/value source and the residual taken from the query side.
BlockResult block_impl(const Tensor& z_query, const Tensor& z_kv,
                       const Tensor& z_residual, const AttentionParams& p,
                       BlockMode mode) {
  if (z_query.rank() != 3) {
    throw ShapeError(msg("attention block: expected (H, W, C), got ",
                         shape_str(z_query.shape())));
  }
  if (z_query.shape() != z_kv.shape()) {
    throw ShapeError(msg("attention block: query ", shape_str(z_query.shape()),
                         " vs key/value ", shape_str(z_kv.shape())));
  }
  const int64_t h = z_query.dim(0), w = z_query.dim(1), c = z_query.dim(2);
  if (c != p.channels) {
    throw ShapeError(msg("attention block: ", c, " channels but params built for ",
                         p.channels));
  }
  const int64_t l = h * w;

  Tensor qf = reshape(z_query, {l, c});
  Tensor kf = reshape(z_kv, {l, c});
  Tensor rf = reshape(z_residual, {l, c});

  Tensor q = add(matmul(qf, p.w_q), p.b_q);
  Tensor k = add(matmul(kf, p.w_k), p.b_k);
  Tensor v = add(matmul(kf, p.w_v), p.b_v);

  AttendResult at = attend_with_weights(q, k, v, p.heads);
  Tensor z_mh = add(matmul(at.output, p.w_o), p.b_o);
  Tensor fused = add(z_mh, rf);

  if (mode == BlockMode::kPassThrough) {
    return {reshape(fused, {h, w, c}), at.weights};
  }
  Tensor normed = layer_norm(fused, p.ln_gain, p.ln_bias);
  Tensor spatial = reshape(normed, {h, w, c});
  Tensor f1 = silu(conv2d(spatial, p.ffn_w1, p.ffn_b1, 1, 1));
  Tensor f2 = conv2d(f1, p.ffn_w2, p.ffn_b2, 1, 1);
  return {f2, at.weights};
}

}  // namespace

BlockResult mhsa_block_full(const Tensor& z, const AttentionParams& params, BlockMode mode) {
  return block_impl(z, z, z, params, mode);
}

BlockResult mhca_block_full(const Tensor& z_query, const Tensor& z_prior,
                            const AttentionParams& params, BlockMode mode,
                            ResidualSource residual) {
  const Tensor& res = residual == ResidualSource::kPrior ? z_prior : z_query;
  return block_impl(z_query, z_prior, res, params, mode);
}

Tensor mhsa_block(const Tensor& z, const AttentionParams& params, BlockMode mode) {
  return mhsa_block_full(z, params, mode).output;
}

Tensor mhca_block(const Tensor& z_query, const Tensor& z_prior,
                  const AttentionParams& params, BlockMode mode,
                  ResidualSource residual) {
  return mhca_block_full(z_query, z_prior, params, mode, residual).output;
}

}  // namespace frt
