#include <doctest.h>

#include <cmath>

#include "frt/grad_check.hpp"
#include "frt/model.hpp"
#include "test_util.hpp"

using namespace frt;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.image_size = 32;
  cfg.base_channels = 4;
  cfg.channel_cap = 8;
  cfg.latent_channels = 8;
  cfg.heads = 2;
  return cfg;
}

}  // namespace

TEST_CASE("channel schedule doubles up to the cap") {
  ModelConfig cfg;
  cfg.base_channels = 64;
  cfg.channel_cap = 256;
  CHECK(cfg.widths() == std::vector<int64_t>{64, 128, 256, 256, 256});
}

TEST_CASE("encode shape contract at paper geometry") {
  // thin channels keep the run cheap; the geometry is the paper's 512 -> 16
  NoGradGuard ng;
  ModelConfig cfg;
  cfg.image_size = 512;
  cfg.base_channels = 1;
  cfg.channel_cap = 1;
  cfg.latent_channels = 256;
  Rng rng(0);
  EncoderParams enc = EncoderParams::init(cfg, rng);
  Tensor img = Tensor::rand_uniform({512, 512, 3}, rng, 0.0, 1.0);
  Tensor z = encode(img, enc);
  CHECK(z.shape() == Shape{16, 16, 256});
}

TEST_CASE("encode and decode shape contract at desk scale") {
  NoGradGuard ng;
  ModelConfig cfg = tiny_config();
  Rng rng(1);
  EncoderParams enc = EncoderParams::init(cfg, rng);
  DecoderParams dec = DecoderParams::init(cfg, rng);
  Tensor img = Tensor::rand_uniform({32, 32, 3}, rng, 0.0, 1.0);
  Tensor z = encode(img, enc);
  CHECK(z.shape() == Shape{1, 1, 8});
  Tensor back = decode(z, dec);
  CHECK(back.shape() == Shape{32, 32, 3});
  for (double v : back.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("encode rejects bad inputs") {
  NoGradGuard ng;
  ModelConfig cfg = tiny_config();
  Rng rng(2);
  EncoderParams enc = EncoderParams::init(cfg, rng);
  CHECK_THROWS_AS(encode(Tensor::zeros({33, 33, 3}), enc), ShapeError);
  CHECK_THROWS_AS(encode(Tensor::full({32, 32, 3}, 1.5), enc), Error);
}

TEST_CASE("decode is deterministic") {
  NoGradGuard ng;
  ModelConfig cfg = tiny_config();
  Rng rng(3);
  DecoderParams dec = DecoderParams::init(cfg, rng);
  Tensor z = Tensor::rand_uniform({1, 1, 8}, rng, -1.0, 1.0);
  Tensor a = decode(z, dec);
  Tensor b = decode(z, dec);
  CHECK(test::bit_equal(a.values(), b.values()));
}

TEST_CASE("gradient check of a one-block reduced encoder on 8x8") {
  Rng rng(4);
  ConvParams stem = ConvParams::init(3, 3, 3, 4, rng);
  ResBlockParams block = ResBlockParams::init(4, 4, rng);
  ConvParams head = ConvParams::init(3, 3, 4, 4, rng);

  double err = grad_check(
      [&](const std::vector<Tensor>& in) {
        Tensor h = conv2d(in[0], stem.w, stem.b, 1, 1);
        h = res_block(h, block);
        h = avg_pool2(h);
        h = conv2d(h, in[1], head.b, 1, 1);
        return test::scalarize(h, 91);
      },
      {Tensor::rand_uniform({8, 8, 3}, rng, 0.1, 0.9), head.w}, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("gradient check end to end through a reduced pipeline") {
  Rng rng(5);
  ConvParams stem = ConvParams::init(3, 3, 3, 8, rng);
  ResBlockParams eblock = ResBlockParams::init(8, 8, rng);
  ConvParams ehead = ConvParams::init(3, 3, 8, 8, rng);
  AttentionParams mhca = AttentionParams::init(8, 2, rng);
  ResBlockParams dblock = ResBlockParams::init(8, 8, rng);
  ConvParams dhead = ConvParams::init(3, 3, 8, 3, rng);
  Codebook book = Codebook::init(16, 8, 5);

  double err = grad_check(
      [&](const std::vector<Tensor>& in) {
        Tensor z = conv2d(in[0], stem.w, stem.b, 1, 1);
        z = res_block(z, eblock);
        z = avg_pool2(z);
        z = conv2d(z, ehead.w, ehead.b, 1, 1);  // (4,4,8) latent
        auto q = quantize(z, book);
        Tensor fused = mhca_block(z, straight_through(z, q.z_p), mhca);
        Tensor img = upsample_nearest2(res_block(fused, dblock));
        img = sigmoid(scale(conv2d(img, dhead.w, dhead.b, 1, 1), 2.0));
        return test::scalarize(img, 92);
      },
      {Tensor::rand_uniform({8, 8, 3}, rng, 0.1, 0.9)}, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("hqgen: codebook fixed point gives zero dictionary losses") {
  tape().reset();
  ModelConfig cfg = tiny_config();
  Rng rng(6);
  EncoderParams enc = EncoderParams::init(cfg, rng);
  DecoderParams dec = DecoderParams::init(cfg, rng);
  Tensor img = Tensor::rand_uniform({32, 32, 3}, rng, 0.0, 1.0);
  Tensor z_h = encode(img, enc);

  // codebook whose first row is exactly the encoded latent
  Codebook book = Codebook::init(4, 8, 6);
  for (int64_t j = 0; j < 8; ++j) book.entries.values_mut()[static_cast<size_t>(j)] = z_h.flat(j);

  auto out = hqgen_forward(img, enc, dec, book);
  CHECK(out.indices == std::vector<int64_t>{0});
  auto losses = dict_losses(out.z_h, out.z_p);
  CHECK(losses.dictionary.item() == 0.0);
  CHECK(losses.commitment.item() == 0.0);
  tape().reset();
}

TEST_CASE("hqgen: gradients reach encoder parameters through straight-through") {
  tape().reset();
  ModelConfig cfg = tiny_config();
  Rng rng(7);
  EncoderParams enc = EncoderParams::init(cfg, rng);
  DecoderParams dec = DecoderParams::init(cfg, rng);
  Codebook book = Codebook::init(16, 8, 7);
  ParamStore store;
  enc.register_in(store);
  dec.register_in(store);

  Tensor img = Tensor::rand_uniform({32, 32, 3}, rng, 0.0, 1.0);
  auto out = hqgen_forward(img, enc, dec, book);
  Tensor loss = l1_mean(out.reconstruction, img);
  backward(loss);

  const Tensor& stem_w = store.get("encoder.stem.weight");
  REQUIRE(stem_w.has_grad());
  double mag = 0.0;
  for (double g : stem_w.grad()) mag += std::abs(g);
  CHECK(mag > 0.0);
  tape().reset();
  store.zero_grads();
}

TEST_CASE("hqgen indices are reproducible per seed") {
  NoGradGuard ng;
  ModelConfig cfg = tiny_config();
  auto run = [&](uint64_t seed) {
    Rng rng(seed);
    EncoderParams enc = EncoderParams::init(cfg, rng);
    DecoderParams dec = DecoderParams::init(cfg, rng);
    Codebook book = Codebook::init(16, 8, seed);
    Tensor img = Tensor::rand_uniform({32, 32, 3}, rng, 0.0, 1.0);
    return hqgen_forward(img, enc, dec, book).indices;
  };
  CHECK(run(11) == run(11));
}

TEST_CASE("restore: swapping the two attention parameter sets changes the output") {
  NoGradGuard ng;
  ModelConfig cfg = tiny_config();
  cfg.image_size = 64;  // 2x2 latent so attention is nontrivial
  Rng rng(8);
  EncoderParams enc = EncoderParams::init(cfg, rng);
  DecoderParams dec = DecoderParams::init(cfg, rng);
  Codebook book = Codebook::init(16, 8, 8);
  AttentionParams mhca1 = AttentionParams::init(8, 2, rng);
  AttentionParams mhca2 = AttentionParams::init(8, 2, rng);
  Tensor img = Tensor::rand_uniform({64, 64, 3}, rng, 0.0, 1.0);

  auto ab = restore_forward(img, enc, dec, book, mhca1, mhca2);
  auto ba = restore_forward(img, enc, dec, book, mhca2, mhca1);
  CHECK(test::max_abs_diff(ab.restoration.values(), ba.restoration.values()) > 1e-9);
  CHECK(ab.attention1.shape() == Shape{2, 4, 4});
  CHECK(ab.attention2.shape() == Shape{2, 4, 4});
}

TEST_CASE("restore: prior-only path with zeroed value projections") {
  NoGradGuard ng;
  ModelConfig cfg = tiny_config();
  Rng rng(9);
  EncoderParams enc = EncoderParams::init(cfg, rng);
  DecoderParams dec = DecoderParams::init(cfg, rng);
  Codebook book = Codebook::init(16, 8, 9);
  AttentionParams mhca1 = AttentionParams::init(8, 2, rng);
  AttentionParams mhca2 = AttentionParams::init(8, 2, rng);
  for (auto* p : {&mhca1, &mhca2}) {
    for (auto& v : p->w_v.values_mut()) v = 0.0;
    for (auto& v : p->b_v.values_mut()) v = 0.0;
    for (auto& v : p->w_o.values_mut()) v = 0.0;
    for (auto& v : p->b_o.values_mut()) v = 0.0;
  }

  Tensor img = Tensor::rand_uniform({32, 32, 3}, rng, 0.0, 1.0);
  auto out = restore_forward(img, enc, dec, book, mhca1, mhca2, BlockMode::kPassThrough);
  Tensor direct = decode(quantize(encode(img, enc), book).z_p, dec);
  CHECK(test::bit_equal(out.restoration.values(), direct.values()));
}

TEST_CASE("restore: second block consumes the first block's output") {
  NoGradGuard ng;
  ModelConfig cfg = tiny_config();
  cfg.image_size = 64;
  Rng rng(10);
  EncoderParams enc = EncoderParams::init(cfg, rng);
  DecoderParams dec = DecoderParams::init(cfg, rng);
  Codebook book = Codebook::init(16, 8, 10);
  AttentionParams mhca1 = AttentionParams::init(8, 2, rng);
  AttentionParams mhca2 = AttentionParams::init(8, 2, rng);
  // marker: make the second block transparent, value path off
  for (auto& v : mhca2.w_v.values_mut()) v = 0.0;
  for (auto& v : mhca2.b_v.values_mut()) v = 0.0;
  for (auto& v : mhca2.w_o.values_mut()) v = 0.0;
  for (auto& v : mhca2.b_o.values_mut()) v = 0.0;

  Tensor img = Tensor::rand_uniform({64, 64, 3}, rng, 0.0, 1.0);

  // run with mhca2 pass-through: restoration decodes mhca1's output exactly
  Tensor z_d = encode(img, enc);
  auto q = quantize(z_d, book);
  Tensor first = mhca_block(z_d, q.z_p, mhca1);

  // emulate the pipeline with the transparent second block
  auto full = [&]() {
    auto o = restore_forward(img, enc, dec, book, mhca1, mhca2, BlockMode::kFull);
    return o;
  }();
  // mhca2 in full mode still applies LN+FFN, so compare its input instead:
  Tensor expect = mhca_block(z_d, first, mhca2);
  CHECK(test::bit_equal(full.z_fused.values(), expect.values()));
}

TEST_CASE("module outputs finite on random inputs across 5 seeds") {
  NoGradGuard ng;
  ModelConfig cfg = tiny_config();
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    EncoderParams enc = EncoderParams::init(cfg, rng);
    DecoderParams dec = DecoderParams::init(cfg, rng);
    Codebook book = Codebook::init(16, 8, seed);
    AttentionParams m1 = AttentionParams::init(8, 2, rng);
    AttentionParams m2 = AttentionParams::init(8, 2, rng);
    Tensor img = Tensor::rand_uniform({32, 32, 3}, rng, 0.0, 1.0);
    // non-finite values would throw from the finiteness checks
    auto s1 = hqgen_forward(img, enc, dec, book);
    auto s2 = restore_forward(img, enc, dec, book, m1, m2);
    CHECK(s1.reconstruction.numel() == img.numel());
    CHECK(s2.restoration.numel() == img.numel());
  }
}

TEST_CASE("parameter names follow the dotted checkpoint convention") {
  ModelConfig cfg = tiny_config();
  Rng rng(12);
  EncoderParams enc = EncoderParams::init(cfg, rng);
  ParamStore store;
  enc.register_in(store);
  CHECK(store.has("encoder.stem.weight"));
  CHECK(store.has("encoder.block3.conv1.weight"));
  CHECK(store.has("encoder.block11.norm2.gain"));
  CHECK(store.has("encoder.head.bias"));
  CHECK(enc.blocks.size() == 12);
}
