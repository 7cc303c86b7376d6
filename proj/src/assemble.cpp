#include "clft/assemble.hpp"

namespace clft {

AssembleParams AssembleParams::init(const EncoderConfig& cfg, int64_t d_hat, Rng& rng) {
  cfg.validate();
  if (d_hat <= 0) fail("assemble: d_hat must be positive");
  AssembleParams p;
  p.d_hat = d_hat;
  const int64_t d = cfg.dim;
  for (size_t i = 0; i < 4; ++i) {
    AssembleStageParams& st = p.stages[i];
    st.factor = resample_factor_from(cfg.patch, kResampleS[i]);
    st.readout_w = Tensor::trunc_normal({2 * d, d}, rng, 0.02, true);
    st.readout_b = Tensor({d}, 0.0, true);
    st.proj_w = Tensor::trunc_normal({d_hat, d, 1, 1}, rng, 0.02, true);
    st.proj_b = Tensor({d_hat}, 0.0, true);
    const std::vector<int64_t> ws = resample_weight_shape(st.factor, d_hat);
    if (!ws.empty()) {
      st.res_w = Tensor::trunc_normal(ws, rng, 0.02, true);
      st.res_b = Tensor({d_hat}, 0.0, true);
    }
  }
  return p;
}

Tensor readout_project(const Tensor& seq, const Tensor& w, const Tensor& b) {
  if (seq.rank() != 2 || seq.dim(0) < 2)
    fail("readout_project: token sequence with a class token required, got " + shape_str(seq.shape()));
  const int64_t n = seq.dim(0) - 1;
  const Tensor cls_rows = replicate_row(seq, 0, n);
  const Tensor patch_rows = slice_rows(seq, 1, n + 1);
  const Tensor concat = concat_cols({patch_rows, cls_rows});
  return gelu(add_rowvec(matmul(concat, w), b));
}

Tensor project_resample(const Tensor& map, const AssembleStageParams& stage) {
  if (map.rank() != 3) fail("project_resample: rank-3 map required, got " + shape_str(map.shape()));
  const Tensor projected = conv2d(map, stage.proj_w, &stage.proj_b, 1, 0);
  if (stage.factor == ResampleFactor::x1) return projected;
  return resample(projected, stage.factor, stage.res_w, &stage.res_b);
}

std::array<Tensor, 4> assemble_all(const TapSequences& taps, const AssembleParams& params,
                                   const EncoderConfig& cfg) {
  std::array<Tensor, 4> maps;
  for (size_t i = 0; i < 4; ++i) {
    const AssembleStageParams& st = params.stages[i];
    const Tensor tokens = readout_project(taps[i], st.readout_w, st.readout_b);
    const Tensor map = spatialize(tokens, cfg.grid_h(), cfg.grid_w());
    maps[i] = project_resample(map, st);
    const int64_t want_h = cfg.input_h / kResampleS[i];
    const int64_t want_w = cfg.input_w / kResampleS[i];
    if (maps[i].dim(1) != want_h || maps[i].dim(2) != want_w)
      fail("assemble: stage " + std::to_string(i) + " produced " + shape_str(maps[i].shape()) +
           ", expected extents " + std::to_string(want_h) + "x" + std::to_string(want_w));
  }
  return maps;
}

}  // namespace clft
