#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clft/fusion.hpp"
#include "clft/model.hpp"
#include "clft/synthetic.hpp"

using namespace clft;

TEST_CASE("rcu: zero input stays zero (bias-free) and zero weights give identity") {
  Rng rng(61);
  RcuParams p;
  p.w1 = Tensor::randn({4, 4, 3, 3}, rng, 0.3);
  p.w2 = Tensor::randn({4, 4, 3, 3}, rng, 0.3);
  Tensor zero({4, 6, 6});
  Tensor out = rcu(zero, p);
  for (double v : out.data()) CHECK(v == 0.0);

  RcuParams zero_w;
  zero_w.w1 = Tensor({4, 4, 3, 3});
  zero_w.w2 = Tensor({4, 4, 3, 3});
  Tensor x = Tensor::randn({4, 6, 6}, rng, 1.0);
  Tensor same = rcu(x, zero_w);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(same.data()[i] == x.data()[i]);
}

TEST_CASE("rcu: gradient check") {
  Rng rng(62);
  RcuParams p;
  p.w1 = Tensor::randn({3, 3, 3, 3}, rng, 0.3);
  p.w2 = Tensor::randn({3, 3, 3, 3}, rng, 0.3);
  auto rep = finite_difference_check(
      [&p](const std::vector<Tensor>& in) { return rcu(in[0], p); },
      {Tensor::randn({3, 5, 5}, rng, 1.0), p.w1, p.w2});
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("fuse_block: deepest stage treats absent prev as exact zero") {
  Rng rng(63);
  FusionParams fp = FusionParams::init(4, 3, rng);
  Tensor cam = Tensor::randn({4, 6, 6}, rng, 1.0);
  Tensor lid = Tensor::randn({4, 6, 6}, rng, 1.0);
  Tensor zero_prev({4, 6, 6});
  const Tensor without = fuse_block(&cam, &lid, nullptr, fp.blocks[0]);
  const Tensor with_zero = fuse_block(&cam, &lid, &zero_prev, fp.blocks[0]);
  REQUIRE(without.shape() == with_zero.shape());
  for (int64_t i = 0; i < without.size(); ++i)
    CHECK(without.data()[i] == doctest::Approx(with_zero.data()[i]).epsilon(1e-15));
}

TEST_CASE("fuse_block: zero lidar tensor equals the camera-only evaluation (sum-node additivity)") {
  Rng rng(64);
  FusionParams fp = FusionParams::init(4, 3, rng);
  Tensor cam = Tensor::randn({4, 6, 6}, rng, 1.0);
  Tensor zero_lid({4, 6, 6});
  const Tensor with_zero_lid = fuse_block(&cam, &zero_lid, nullptr, fp.blocks[0]);
  const Tensor cam_only = fuse_block(&cam, nullptr, nullptr, fp.blocks[0]);
  REQUIRE(with_zero_lid.shape() == cam_only.shape());
  for (int64_t i = 0; i < cam_only.size(); ++i) CHECK(with_zero_lid.data()[i] == cam_only.data()[i]);
}

TEST_CASE("fuse_block: 12x12 input emits 24x24, mismatched streams throw") {
  Rng rng(65);
  FusionParams fp = FusionParams::init(4, 3, rng);
  Tensor cam = Tensor::randn({4, 12, 12}, rng, 1.0);
  Tensor lid = Tensor::randn({4, 12, 12}, rng, 1.0);
  CHECK(fuse_block(&cam, &lid, nullptr, fp.blocks[0]).shape() == std::vector<int64_t>{4, 24, 24});
  Tensor bad = Tensor::randn({4, 6, 6}, rng, 1.0);
  CHECK_THROWS_AS(fuse_block(&cam, &bad, nullptr, fp.blocks[0]), Error);
}

TEST_CASE("fusion upsample initialization replicates pixels (nearest neighbor)") {
  Rng rng(66);
  FusionParams fp = FusionParams::init(2, 3, rng);
  Tensor x = Tensor::from_data({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor up = transpose_conv2d(x, fp.blocks[0].up_w, &fp.blocks[0].up_b, 2);
  REQUIRE(up.shape() == std::vector<int64_t>{2, 4, 4});
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t v = 0; v < 4; ++v)
      for (int64_t u = 0; u < 4; ++u)
        CHECK(up.data()[static_cast<size_t>((c * 4 + v) * 4 + u)] ==
              x.data()[static_cast<size_t>((c * 2 + v / 2) * 2 + u / 2)]);
}

TEST_CASE("segmentation_head: toy 48x48 fusion output becomes 3x96x96 finite logits") {
  Rng rng(67);
  FusionParams fp = FusionParams::init(8, 3, rng);
  Tensor x = Tensor::randn({8, 48, 48}, rng, 1.0);
  const Tensor logits = segmentation_head(x, fp.head);
  CHECK(logits.shape() == std::vector<int64_t>{3, 96, 96});
  for (double v : logits.data()) CHECK(std::isfinite(v));
}

TEST_CASE("clft_forward: toy C+L emits 3x96x96 and the fold doubles extents per stage") {
  ClftModel model(EncoderConfig::preset(Variant::toy), 16, 5);
  Dataset data = generate_synthetic(1, 9, Separability::joint);
  NoGradGuard ng;
  const Tensor logits = model.forward(&data.frames[0].rgb, &data.frames[0].planes_raw, Modality::fusion);
  CHECK(logits.shape() == std::vector<int64_t>{3, 96, 96});
}

TEST_CASE("modality masking: C mode is bitwise identical to C+L with zeroed planes") {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    ClftModel model(EncoderConfig::preset(Variant::toy), 16, seed);
    Dataset data = generate_synthetic(1, seed + 40, Separability::color);
    NoGradGuard ng;
    const Tensor c_only = model.forward(&data.frames[0].rgb, nullptr, Modality::camera);
    PlaneStack zero_planes(96, 96);
    const Tensor cl_zero = model.forward(&data.frames[0].rgb, &zero_planes, Modality::fusion);
    REQUIRE(c_only.shape() == cl_zero.shape());
    for (int64_t i = 0; i < c_only.size(); ++i) CHECK(c_only.data()[i] == cl_zero.data()[i]);
  }
}

TEST_CASE("clft_forward: missing required stream is a usage error") {
  ClftModel model(EncoderConfig::preset(Variant::toy), 16, 5);
  CHECK_THROWS_AS(model.forward(nullptr, nullptr, Modality::camera), Error);
  CHECK_THROWS_AS(model.forward(nullptr, nullptr, Modality::lidar), Error);
  PlaneStack empty(96, 96);
  CHECK_THROWS_AS(model.forward(nullptr, &empty, Modality::lidar), Error);
}

TEST_CASE("clft_forward: deterministic for fixed parameters and inputs") {
  ClftModel model(EncoderConfig::preset(Variant::toy), 16, 11);
  Dataset data = generate_synthetic(1, 12, Separability::joint);
  NoGradGuard ng;
  const PlaneStack planes = densify(data.frames[0].planes_raw, 2);
  const Tensor a = model.forward(&data.frames[0].rgb, &planes, Modality::fusion);
  const Tensor b = model.forward(&data.frames[0].rgb, &planes, Modality::fusion);
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("end-to-end gradient check of the fusion trunk at small scale") {
  Rng rng(68);
  // minimal geometry: 32x32 input, tokens 4x4
  EncoderConfig cfg = EncoderConfig::preset(Variant::toy);
  cfg.input_h = cfg.input_w = 32;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.depth = 4;
  cfg.taps = {0, 1, 2, 3};
  ClftModel model(cfg, 4, 77);
  Tensor cam_in = Tensor::randn({3, 32, 32}, rng, 0.5);
  Tensor lid_in = Tensor::randn({3, 32, 32}, rng, 0.5);

  std::vector<Tensor> inputs{cam_in, lid_in};
  model.visit_params([&inputs](const std::string&, Tensor& t) { inputs.push_back(t); });
  FdOptions opts;
  opts.max_elements_per_input = 2;
  opts.seed = 123;
  auto rep = finite_difference_check(
      [&](const std::vector<Tensor>&) { return model.forward_normalized(&cam_in, &lid_in); }, inputs, opts);
  CHECK(rep.max_rel_error < 1e-4);
}
