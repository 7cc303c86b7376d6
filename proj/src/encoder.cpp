#include "clft/encoder.hpp"

#include <cmath>

namespace clft {

Variant variant_from_string(const std::string& s) {
  if (s == "base") return Variant::base;
  if (s == "large") return Variant::large;
  if (s == "huge") return Variant::huge;
  if (s == "hybrid") return Variant::hybrid;
  if (s == "toy") return Variant::toy;
  fail("encoder: unknown variant '" + s + "'");
}

std::string variant_to_string(Variant v) {
  switch (v) {
    case Variant::base: return "base";
    case Variant::large: return "large";
    case Variant::huge: return "huge";
    case Variant::hybrid: return "hybrid";
    case Variant::toy: return "toy";
  }
  fail("encoder: bad variant");
}

EncoderConfig EncoderConfig::preset(Variant v) {
  EncoderConfig cfg;
  cfg.variant = v;
  switch (v) {
    case Variant::base:
    case Variant::hybrid:
      cfg.patch = 16;
      cfg.depth = 12;
      cfg.dim = 768;
      cfg.heads = 12;
      cfg.taps = {2, 5, 8, 11};
      cfg.input_h = cfg.input_w = 384;
      break;
    case Variant::large:
      cfg.patch = 16;
      cfg.depth = 24;
      cfg.dim = 1024;
      cfg.heads = 16;
      cfg.taps = {5, 11, 17, 23};
      cfg.input_h = cfg.input_w = 384;
      break;
    case Variant::huge:
      cfg.patch = 16;
      cfg.depth = 32;
      cfg.dim = 1280;
      cfg.heads = 16;
      cfg.taps = {-1, -1, -1, -1};  // no published taps; caller must choose
      cfg.input_h = cfg.input_w = 384;
      break;
    case Variant::toy:
      cfg.patch = 8;
      cfg.depth = 8;
      cfg.dim = 64;
      cfg.heads = 4;
      cfg.taps = {1, 3, 5, 7};
      cfg.input_h = cfg.input_w = 96;
      break;
  }
  return cfg;
}

void EncoderConfig::validate() const {
  if (patch <= 0 || depth <= 0 || dim <= 0 || heads <= 0) fail("encoder config: sizes must be positive");
  if (input_h <= 0 || input_w <= 0) fail("encoder config: input extents must be positive");
  if (input_h % patch != 0 || input_w % patch != 0)
    fail("encoder config: input " + std::to_string(input_h) + "x" + std::to_string(input_w) +
         " not divisible by patch " + std::to_string(patch));
  if (dim % heads != 0) fail("encoder config: dim must be divisible by heads");
  for (int i = 0; i < 4; ++i) {
    if (taps[static_cast<size_t>(i)] < 0 || taps[static_cast<size_t>(i)] >= depth)
      fail("encoder config: tap " + std::to_string(taps[static_cast<size_t>(i)]) +
           " outside [0, depth); huge has no preset taps and needs explicit ones");
    if (i > 0 && taps[static_cast<size_t>(i)] <= taps[static_cast<size_t>(i - 1)])
      fail("encoder config: taps must be strictly ascending");
  }
  if (variant == Variant::hybrid && patch % 4 != 0)
    fail("encoder config: hybrid stem needs patch divisible by 4");
}

namespace {

int64_t stem_c1(int64_t dim) { return std::max<int64_t>(8, dim / 8); }
int64_t stem_c2(int64_t dim) { return std::max<int64_t>(16, dim / 4); }

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderParams p;
  const int64_t d = cfg.dim;
  if (cfg.hybrid_stem()) {
    const int64_t c1 = stem_c1(d), c2 = stem_c2(d);
    p.stem_w1 = Tensor::trunc_normal({c1, 3, 3, 3}, rng, 0.02, true);
    p.stem_b1 = Tensor({c1}, 0.0, true);
    p.stem_w2 = Tensor::trunc_normal({c2, c1, 3, 3}, rng, 0.02, true);
    p.stem_b2 = Tensor({c2}, 0.0, true);
    const int64_t k3 = cfg.patch / 4;
    p.stem_w3 = Tensor::trunc_normal({d, c2, k3, k3}, rng, 0.02, true);
    p.stem_b3 = Tensor({d}, 0.0, true);
  } else {
    p.patch_w = Tensor::trunc_normal({3 * cfg.patch * cfg.patch, d}, rng, 0.02, true);
    p.patch_b = Tensor({d}, 0.0, true);
  }
  p.cls_token = Tensor::trunc_normal({1, d}, rng, 0.02, true);
  p.pos_emb = Tensor::trunc_normal({cfg.tokens() + 1, d}, rng, 0.02, true);
  p.layers.resize(static_cast<size_t>(cfg.depth));
  for (LayerParams& lp : p.layers) {
    lp.ln1_g = Tensor({d}, 1.0, true);
    lp.ln1_b = Tensor({d}, 0.0, true);
    lp.wq = Tensor::trunc_normal({d, d}, rng, 0.02, true);
    lp.bq = Tensor({d}, 0.0, true);
    lp.wk = Tensor::trunc_normal({d, d}, rng, 0.02, true);
    lp.bk = Tensor({d}, 0.0, true);
    lp.wv = Tensor::trunc_normal({d, d}, rng, 0.02, true);
    lp.bv = Tensor({d}, 0.0, true);
    lp.wo = Tensor::trunc_normal({d, d}, rng, 0.02, true);
    lp.bo = Tensor({d}, 0.0, true);
    lp.ln2_g = Tensor({d}, 1.0, true);
    lp.ln2_b = Tensor({d}, 0.0, true);
    lp.w1 = Tensor::trunc_normal({d, 4 * d}, rng, 0.02, true);
    lp.b1 = Tensor({4 * d}, 0.0, true);
    lp.w2 = Tensor::trunc_normal({4 * d, d}, rng, 0.02, true);
    lp.b2 = Tensor({d}, 0.0, true);
  }
  return p;
}

Tensor patch_embed(const Tensor& image, const EncoderConfig& cfg, const EncoderParams& params) {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != cfg.input_h || image.dim(2) != cfg.input_w)
    fail("patch_embed: image " + shape_str(image.shape()) + " does not match configured input " +
         std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w));
  const Tensor rows = patchify(image, cfg.patch);
  return add_rowvec(matmul(rows, params.patch_w), params.patch_b);
}

Tensor hybrid_stem(const Tensor& image, const EncoderConfig& cfg, const EncoderParams& params) {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != cfg.input_h || image.dim(2) != cfg.input_w)
    fail("hybrid_stem: image " + shape_str(image.shape()) + " does not match configured input " +
         std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w));
  Tensor x = relu(conv2d(image, params.stem_w1, &params.stem_b1, 2, 1));
  x = relu(conv2d(x, params.stem_w2, &params.stem_b2, 2, 1));
  const int64_t k3 = cfg.patch / 4;
  x = conv2d(x, params.stem_w3, &params.stem_b3, k3, 0);
  return flatten_tokens(x);
}

Tensor add_class_and_position(const Tensor& seq, const EncoderConfig& cfg, const EncoderParams& params) {
  if (seq.rank() != 2 || seq.dim(0) != cfg.tokens())
    fail("add_class_and_position: expected " + std::to_string(cfg.tokens()) + " patch tokens, got " +
         shape_str(seq.shape()));
  return add(concat_rows(params.cls_token, seq), params.pos_emb);
}

namespace {

Tensor multi_head_attention(const Tensor& x, const LayerParams& p, int64_t heads) {
  const int64_t d = x.dim(1);
  const int64_t dh = d / heads;
  const Tensor q = add_rowvec(matmul(x, p.wq), p.bq);
  const Tensor k = add_rowvec(matmul(x, p.wk), p.bk);
  const Tensor v = add_rowvec(matmul(x, p.wv), p.bv);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<size_t>(heads));
  for (int64_t hh = 0; hh < heads; ++hh) {
    const Tensor qh = slice_cols(q, hh * dh, (hh + 1) * dh);
    const Tensor kh = slice_cols(k, hh * dh, (hh + 1) * dh);
    const Tensor vh = slice_cols(v, hh * dh, (hh + 1) * dh);
    const Tensor scores = scale(matmul(qh, transpose2d(kh)), inv_sqrt_dh);
    const Tensor attn = softmax(scores, 1);
    head_outputs.push_back(matmul(attn, vh));
  }
  const Tensor ctx = heads == 1 ? head_outputs[0] : concat_cols(head_outputs);
  return add_rowvec(matmul(ctx, p.wo), p.bo);
}

Tensor mlp_block(const Tensor& x, const LayerParams& p) {
  const Tensor h = gelu(add_rowvec(matmul(x, p.w1), p.b1));
  return add_rowvec(matmul(h, p.w2), p.b2);
}

}  // namespace

Tensor transformer_layer(const Tensor& seq, const LayerParams& p, int64_t heads) {
  Tensor x = add(seq, multi_head_attention(layer_norm(seq, p.ln1_g, p.ln1_b), p, heads));
  return add(x, mlp_block(layer_norm(x, p.ln2_g, p.ln2_b), p));
}

TapSequences encode_tokens(const Tensor& seq, const EncoderConfig& cfg, const EncoderParams& params) {
  cfg.validate();
  if (seq.rank() != 2 || seq.dim(0) != cfg.tokens() + 1 || seq.dim(1) != cfg.dim)
    fail("encode_tokens: sequence " + shape_str(seq.shape()) + " does not match config");
  TapSequences out;
  Tensor x = seq;
  size_t next_tap = 0;
  for (int64_t layer = 0; layer < cfg.depth; ++layer) {
    x = transformer_layer(x, params.layers[static_cast<size_t>(layer)], cfg.heads);
    while (next_tap < 4 && cfg.taps[next_tap] == layer) {
      out[next_tap] = x;
      ++next_tap;
    }
  }
  if (next_tap != 4) fail("encode_tokens: not every tap was reached");
  return out;
}

TapSequences encode(const Tensor& image, const EncoderConfig& cfg, const EncoderParams& params) {
  const Tensor tokens = cfg.hybrid_stem() ? hybrid_stem(image, cfg, params) : patch_embed(image, cfg, params);
  return encode_tokens(add_class_and_position(tokens, cfg, params), cfg, params);
}

}  // namespace clft
