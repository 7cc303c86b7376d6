#pragma once

#include <array>
#include <string>
#include <vector>

#include "clft/tensor.hpp"

namespace clft {

enum class Variant { base, large, huge, hybrid, toy };
Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);

struct EncoderConfig {
  Variant variant = Variant::toy;
  int64_t patch = 8;
  int64_t depth = 8;
  int64_t dim = 64;
  int64_t heads = 4;
  std::array<int64_t, 4> taps{1, 3, 5, 7};
  int64_t input_h = 96;
  int64_t input_w = 96;

  /// Preset geometry per variant. huge has no published taps; they must be
  /// set by the caller before validate().
  static EncoderConfig preset(Variant v);

  void validate() const;
  int64_t grid_h() const { return input_h / patch; }
  int64_t grid_w() const { return input_w / patch; }
  int64_t tokens() const { return grid_h() * grid_w(); }  // N, without the class token
  bool hybrid_stem() const { return variant == Variant::hybrid; }
};

struct LayerParams {
  Tensor ln1_g, ln1_b;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // D x D projections
  Tensor ln2_g, ln2_b;
  Tensor w1, b1, w2, b2;  // MLP D -> 4D -> D
};

struct EncoderParams {
  // Patch embedding (3p^2 -> D), or a three-block strided conv stem for the
  // hybrid variant.
  Tensor patch_w, patch_b;
  Tensor stem_w1, stem_b1, stem_w2, stem_b2, stem_w3, stem_b3;
  Tensor cls_token;  // 1 x D
  Tensor pos_emb;    // (N+1) x D
  std::vector<LayerParams> layers;

  static EncoderParams init(const EncoderConfig& cfg, Rng& rng);
};

using TapSequences = std::array<Tensor, 4>;

/// N x D patch tokens from a 3 x h x w image.
Tensor patch_embed(const Tensor& image, const EncoderConfig& cfg, const EncoderParams& params);
/// Conv-stem tokens for the hybrid variant; same N x D geometry.
Tensor hybrid_stem(const Tensor& image, const EncoderConfig& cfg, const EncoderParams& params);
/// Prepends the class token and adds the positional table.
Tensor add_class_and_position(const Tensor& seq, const EncoderConfig& cfg, const EncoderParams& params);
/// Pre-norm block: x + MHA(LN(x)), then x + MLP(LN(x)).
Tensor transformer_layer(const Tensor& seq, const LayerParams& p, int64_t heads);

/// Runs the embedded sequence through all layers, returning the outputs of
/// the four tapped layers.
TapSequences encode_tokens(const Tensor& seq, const EncoderConfig& cfg, const EncoderParams& params);
TapSequences encode(const Tensor& image, const EncoderConfig& cfg, const EncoderParams& params);

}  // namespace clft
