#pragma once

#include <array>

#include "clft/encoder.hpp"
#include "clft/tensor.hpp"

namespace clft {

inline constexpr int64_t kDefaultDHat = 256;
inline constexpr std::array<int64_t, 4> kResampleS{4, 8, 16, 32};

struct AssembleStageParams {
  Tensor readout_w;  // 2D x D
  Tensor readout_b;  // D
  Tensor proj_w;     // DHat x D x 1 x 1
  Tensor proj_b;     // DHat
  Tensor res_w;      // factor-dependent; undefined for the unit factor
  Tensor res_b;
  ResampleFactor factor = ResampleFactor::x1;
};

struct AssembleParams {
  std::array<AssembleStageParams, 4> stages;
  int64_t d_hat = kDefaultDHat;

  static AssembleParams init(const EncoderConfig& cfg, int64_t d_hat, Rng& rng);
};

/// Algorithm-1 readout: replicate the class token, concatenate it to every
/// patch token, and push the 2D-wide rows through GELU(W.x + b).
Tensor readout_project(const Tensor& seq, const Tensor& w, const Tensor& b);

/// One stage of Eq. 1: 1x1 projection D -> DHat, then the stage's resampling.
Tensor project_resample(const Tensor& map, const AssembleStageParams& stage);

/// Stage i pairs tap i with s[i] = {4, 8, 16, 32}; output i has spatial
/// extents (h/s[i], w/s[i]) and DHat channels.
std::array<Tensor, 4> assemble_all(const TapSequences& taps, const AssembleParams& params,
                                   const EncoderConfig& cfg);

}  // namespace clft
