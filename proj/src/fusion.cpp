#include "clft/fusion.hpp"

namespace clft {

namespace {

RcuParams init_rcu(int64_t c, Rng& rng) {
  RcuParams p;
  p.w1 = Tensor::trunc_normal({c, c, 3, 3}, rng, 0.02, true);
  p.w2 = Tensor::trunc_normal({c, c, 3, 3}, rng, 0.02, true);
  return p;
}

Tensor nearest_upsample_weights(int64_t c) {
  // Transpose conv k2 s2 whose init replicates each input pixel 2x2.
  Tensor w({c, c, 2, 2}, 0.0, true);
  for (int64_t i = 0; i < c; ++i)
    for (int64_t k = 0; k < 4; ++k) w.data()[static_cast<size_t>((i * c + i) * 4 + k)] = 1.0;
  return w;
}

}  // namespace

FusionParams FusionParams::init(int64_t channels, int64_t classes, Rng& rng) {
  if (channels <= 0 || classes <= 0) fail("fusion: channels and classes must be positive");
  FusionParams p;
  p.channels = channels;
  p.classes = classes;
  for (FusionBlockParams& b : p.blocks) {
    b.cam_rcu1 = init_rcu(channels, rng);
    b.cam_rcu2 = init_rcu(channels, rng);
    b.lid_rcu1 = init_rcu(channels, rng);
    b.lid_rcu2 = init_rcu(channels, rng);
    b.post_rcu = init_rcu(channels, rng);
    b.up_w = nearest_upsample_weights(channels);
    b.up_b = Tensor({channels}, 0.0, true);
  }
  p.head.up_w = nearest_upsample_weights(channels);
  p.head.up_b = Tensor({channels}, 0.0, true);
  p.head.cls_w = Tensor::trunc_normal({classes, channels, 1, 1}, rng, 0.02, true);
  p.head.cls_b = Tensor({classes}, 0.0, true);
  return p;
}

Tensor rcu(const Tensor& x, const RcuParams& p) {
  const Tensor inner = conv2d(relu(x), p.w1, nullptr, 1, 1);
  return add(x, conv2d(relu(inner), p.w2, nullptr, 1, 1));
}

Tensor fuse_block(const Tensor* cam, const Tensor* lid, const Tensor* prev, const FusionBlockParams& p) {
  if (!cam && !lid && !prev) fail("fuse_block: all inputs absent");
  if (cam && lid && cam->shape() != lid->shape())
    fail("fuse_block: stream shape mismatch " + shape_str(cam->shape()) + " vs " + shape_str(lid->shape()));
  Tensor sum;
  auto add_in = [&sum](Tensor t) { sum = sum.defined() ? add(sum, t) : std::move(t); };
  if (cam) add_in(rcu(rcu(*cam, p.cam_rcu1), p.cam_rcu2));
  if (lid) add_in(rcu(rcu(*lid, p.lid_rcu1), p.lid_rcu2));
  if (prev) {
    if (sum.defined() && prev->shape() != sum.shape())
      fail("fuse_block: previous stage shape " + shape_str(prev->shape()) + " does not match streams " +
           shape_str(sum.shape()));
    add_in(*prev);
  }
  return transpose_conv2d(rcu(sum, p.post_rcu), p.up_w, &p.up_b, 2);
}

Tensor segmentation_head(const Tensor& x, const HeadParams& p) {
  const Tensor up = transpose_conv2d(x, p.up_w, &p.up_b, 2);
  return conv2d(up, p.cls_w, &p.cls_b, 1, 0);
}

}  // namespace clft
