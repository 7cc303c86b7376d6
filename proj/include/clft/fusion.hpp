#pragma once

#include <array>

#include "clft/tensor.hpp"

namespace clft {

/// Residual convolution unit: x + conv2(relu(conv1(relu(x)))) with bias-free
/// 3x3 convolutions. Bias-free is what makes a zeroed stream contribute
/// exactly zero at the fusion sum.
struct RcuParams {
  Tensor w1, w2;  // C x C x 3 x 3
};

struct FusionBlockParams {
  RcuParams cam_rcu1, cam_rcu2;
  RcuParams lid_rcu1, lid_rcu2;
  RcuParams post_rcu;
  Tensor up_w;  // C x C x 2 x 2 transpose conv, nearest-neighbor init
  Tensor up_b;
};

struct HeadParams {
  Tensor up_w;  // C x C x 2 x 2 transpose conv
  Tensor up_b;
  Tensor cls_w;  // classes x C x 1 x 1
  Tensor cls_b;
};

struct FusionParams {
  std::array<FusionBlockParams, 4> blocks;  // index 0 pairs with the coarsest map
  HeadParams head;
  int64_t channels = 0;
  int64_t classes = 3;

  static FusionParams init(int64_t channels, int64_t classes, Rng& rng);
};

Tensor rcu(const Tensor& x, const RcuParams& p);

/// One fusion stage: streams through two RCUs each, summed together with the
/// previous stage's output, one post RCU, then the trailing 2x upsample.
/// Absent streams/prev are null and contribute nothing to the sum.
Tensor fuse_block(const Tensor* cam, const Tensor* lid, const Tensor* prev, const FusionBlockParams& p);

/// Final 2x transpose conv plus the 1x1 class projection.
Tensor segmentation_head(const Tensor& x, const HeadParams& p);

}  // namespace clft
