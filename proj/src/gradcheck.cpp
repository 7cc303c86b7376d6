#include "clft/gradcheck.hpp"

#include <iomanip>
#include <ostream>

#include "clft/model.hpp"
#include "clft/synthetic.hpp"
#include "clft/training.hpp"

namespace clft {

GradcheckScope gradcheck_scope_from_string(const std::string& s) {
  if (s == "ops") return GradcheckScope::ops;
  if (s == "encoder") return GradcheckScope::encoder;
  if (s == "full") return GradcheckScope::full;
  fail("gradcheck: unknown scope '" + s + "'");
}

namespace {

using FdFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct Check {
  std::string name;
  FdFn fn;
  std::vector<Tensor> inputs;
  FdOptions opts;
};

/// Negative-control op: gelu forward with a deliberately wrong backward.
Tensor gelu_wrong_backward(const Tensor& x) {
  auto xn = x.node();
  Tensor out = make_op_output(x.shape(), {x}, [xn](Node& self) {
    xn->ensure_grad();
    const int64_t n = self.numel();
    for (int64_t i = 0; i < n; ++i) xn->grad[i] += 1.05 * self.grad[i];  // corrupted
  });
  for (int64_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[static_cast<size_t>(i)];
    out.data()[static_cast<size_t>(i)] = 0.5 * v * (1.0 + std::erf(v * 0.7071067811865476));
  }
  return out;
}

std::vector<Check> op_checks(uint64_t seed) {
  Rng rng(seed);
  std::vector<Check> checks;
  auto randn = [&rng](std::vector<int64_t> shape, double sigma = 1.0) {
    return Tensor::randn(std::move(shape), rng, sigma);
  };

  checks.push_back({"matmul", [](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); },
                    {randn({4, 5}), randn({5, 3})}, {}});
  checks.push_back({"add", [](const std::vector<Tensor>& in) { return add(in[0], in[1]); },
                    {randn({3, 4}), randn({3, 4})}, {}});
  checks.push_back({"sub", [](const std::vector<Tensor>& in) { return sub(in[0], in[1]); },
                    {randn({3, 4}), randn({3, 4})}, {}});
  checks.push_back({"mul", [](const std::vector<Tensor>& in) { return mul(in[0], in[1]); },
                    {randn({3, 4}), randn({3, 4})}, {}});
  checks.push_back({"scale", [](const std::vector<Tensor>& in) { return scale(in[0], -1.7); },
                    {randn({3, 4})}, {}});
  checks.push_back({"add_rowvec", [](const std::vector<Tensor>& in) { return add_rowvec(in[0], in[1]); },
                    {randn({5, 4}), randn({4})}, {}});
  checks.push_back({"transpose2d", [](const std::vector<Tensor>& in) { return transpose2d(in[0]); },
                    {randn({4, 6})}, {}});
  checks.push_back({"relu", [](const std::vector<Tensor>& in) { return relu(in[0]); },
                    {randn({40})}, {}});
  checks.push_back({"gelu", [](const std::vector<Tensor>& in) { return gelu(in[0]); },
                    {randn({40})}, {}});
  // Weight the sum so softmax has a nontrivial gradient (plain sum of a
  // softmax row is constant 1).
  checks.push_back({"softmax",
                    [](const std::vector<Tensor>& in) { return mul(softmax(in[0], 1), in[1]); },
                    {randn({4, 6}), randn({4, 6})}, {}});
  checks.push_back({"softmax_axis0",
                    [](const std::vector<Tensor>& in) { return mul(softmax(in[0], 0), in[1]); },
                    {randn({4, 6}), randn({4, 6})}, {}});
  checks.push_back({"layer_norm",
                    [](const std::vector<Tensor>& in) { return layer_norm(in[0], in[1], in[2]); },
                    {randn({5, 8}), randn({8}, 0.5), randn({8}, 0.5)}, {}});
  checks.push_back({"conv2d",
                    [](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], &in[2], 1, 1); },
                    {randn({3, 6, 6}), randn({4, 3, 3, 3}, 0.4), randn({4}, 0.2)}, {}});
  checks.push_back({"conv2d_strided",
                    [](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], nullptr, 2, 0); },
                    {randn({2, 6, 6}), randn({3, 2, 2, 2}, 0.4)}, {}});
  checks.push_back({"transpose_conv2d",
                    [](const std::vector<Tensor>& in) { return transpose_conv2d(in[0], in[1], &in[2], 2); },
                    {randn({3, 5, 5}), randn({3, 2, 2, 2}, 0.4), randn({2}, 0.2)}, {}});
  checks.push_back({"resample_x4",
                    [](const std::vector<Tensor>& in) {
                      return resample(in[0], ResampleFactor::x4, in[1], &in[2]);
                    },
                    {randn({2, 3, 3}), randn({2, 2, 4, 4}, 0.3), randn({2}, 0.2)}, {}});
  checks.push_back({"resample_x2",
                    [](const std::vector<Tensor>& in) {
                      return resample(in[0], ResampleFactor::x2, in[1], &in[2]);
                    },
                    {randn({2, 4, 4}), randn({2, 2, 2, 2}, 0.3), randn({2}, 0.2)}, {}});
  checks.push_back({"resample_half",
                    [](const std::vector<Tensor>& in) {
                      return resample(in[0], ResampleFactor::half, in[1], &in[2]);
                    },
                    {randn({2, 6, 6}), randn({2, 2, 2, 2}, 0.3), randn({2}, 0.2)}, {}});
  checks.push_back({"resample_quarter",
                    [](const std::vector<Tensor>& in) {
                      return resample(in[0], ResampleFactor::quarter, in[1], &in[2]);
                    },
                    {randn({2, 8, 8}), randn({2, 2, 4, 4}, 0.3), randn({2}, 0.2)}, {}});
  checks.push_back({"concat_cols",
                    [](const std::vector<Tensor>& in) { return concat_cols({in[0], in[1]}); },
                    {randn({3, 2}), randn({3, 4})}, {}});
  checks.push_back({"concat_rows",
                    [](const std::vector<Tensor>& in) { return concat_rows(in[0], in[1]); },
                    {randn({2, 4}), randn({3, 4})}, {}});
  checks.push_back({"slice_cols", [](const std::vector<Tensor>& in) { return slice_cols(in[0], 1, 4); },
                    {randn({3, 6})}, {}});
  checks.push_back({"slice_rows", [](const std::vector<Tensor>& in) { return slice_rows(in[0], 1, 3); },
                    {randn({5, 4})}, {}});
  checks.push_back({"replicate_row",
                    [](const std::vector<Tensor>& in) { return replicate_row(in[0], 0, 5); },
                    {randn({3, 4})}, {}});
  checks.push_back({"reshape_copy",
                    [](const std::vector<Tensor>& in) { return reshape_copy(in[0], {2, 6}); },
                    {randn({3, 4})}, {}});
  checks.push_back({"spatialize", [](const std::vector<Tensor>& in) { return spatialize(in[0], 2, 3); },
                    {randn({6, 4})}, {}});
  checks.push_back({"flatten_tokens", [](const std::vector<Tensor>& in) { return flatten_tokens(in[0]); },
                    {randn({4, 2, 3})}, {}});
  checks.push_back({"patchify", [](const std::vector<Tensor>& in) { return patchify(in[0], 2); },
                    {randn({3, 4, 4})}, {}});

  {
    ClassMask mask(4, 4);
    Rng mask_rng(seed + 1);
    for (auto& code : mask.codes) {
      const int64_t r = mask_rng.uniform_int(4);
      code = r == 3 ? kVoid : static_cast<uint8_t>(r);
    }
    checks.push_back({"weighted_cross_entropy",
                      [mask](const std::vector<Tensor>& in) {
                        return weighted_cross_entropy(in[0], mask, {1.0, 2.0, 4.0}).loss;
                      },
                      {randn({3, 4, 4})}, {}});
  }
  return checks;
}

std::vector<Check> encoder_checks(uint64_t seed) {
  std::vector<Check> checks;
  Rng rng(seed);

  // One pre-norm layer on 8 tokens, every element checked.
  {
    EncoderConfig cfg = EncoderConfig::preset(Variant::toy);
    cfg.dim = 16;
    cfg.heads = 4;
    auto params = std::make_shared<EncoderParams>(EncoderParams::init(cfg, rng));
    Tensor seq = Tensor::randn({8, 16}, rng, 1.0);
    LayerParams& lp = params->layers[0];
    std::vector<Tensor> inputs{seq,    lp.ln1_g, lp.ln1_b, lp.wq, lp.bq, lp.wk, lp.bk, lp.wv, lp.bv,
                               lp.wo,  lp.bo,    lp.ln2_g, lp.ln2_b, lp.w1, lp.b1, lp.w2, lp.b2};
    checks.push_back({"transformer_layer_8tok",
                      [params](const std::vector<Tensor>& in) {
                        return transformer_layer(in[0], params->layers[0], 4);
                      },
                      inputs, {}});
  }

  // Full toy encoder, subsampled over every parameter tensor.
  {
    EncoderConfig cfg = EncoderConfig::preset(Variant::toy);
    cfg.input_h = cfg.input_w = 32;  // keeps the exhaustive-ish pass quick
    auto params = std::make_shared<EncoderParams>(EncoderParams::init(cfg, rng));
    Tensor image = Tensor::randn({3, 32, 32}, rng, 1.0);
    std::vector<Tensor> inputs{image, params->patch_w, params->patch_b, params->cls_token, params->pos_emb};
    for (LayerParams& lp : params->layers) {
      inputs.push_back(lp.wq);
      inputs.push_back(lp.wv);
      inputs.push_back(lp.w1);
      inputs.push_back(lp.w2);
      inputs.push_back(lp.ln1_g);
      inputs.push_back(lp.ln2_b);
    }
    FdOptions opts;
    opts.max_elements_per_input = 4;
    opts.seed = seed;
    checks.push_back({"toy_encoder_all_taps",
                      [params, cfg](const std::vector<Tensor>& in) {
                        const TapSequences taps = encode(in[0], cfg, *params);
                        Tensor acc = sum_all(taps[0]);
                        for (size_t i = 1; i < 4; ++i) acc = add(acc, sum_all(taps[i]));
                        return acc;
                      },
                      inputs, opts});
  }
  return checks;
}

std::vector<Check> full_checks(uint64_t seed, int64_t element_budget) {
  std::vector<Check> checks;
  auto model = std::make_shared<ClftModel>(EncoderConfig::preset(Variant::toy), 32, seed);
  Dataset data = generate_synthetic(1, seed + 1, Separability::joint);
  auto rgb = std::make_shared<Tensor>(rgb_to_input(data.frames[0].rgb));
  auto planes = std::make_shared<Tensor>(planes_to_input(densify(data.frames[0].planes_raw, 2)));

  std::vector<Tensor> inputs{*rgb, *planes};
  model->visit_params([&inputs](const std::string&, Tensor& t) { inputs.push_back(t); });

  FdOptions opts;
  opts.max_elements_per_input = element_budget;
  opts.seed = seed;
  checks.push_back({"toy_clft_forward_cl",
                    [model, rgb, planes](const std::vector<Tensor>&) {
                      return model->forward_normalized(rgb.get(), planes.get());
                    },
                    inputs, opts});
  return checks;
}

}  // namespace

bool run_gradcheck(const GradcheckOptions& opts, std::ostream& out) {
  std::vector<Check> checks = op_checks(opts.seed);
  if (opts.scope == GradcheckScope::encoder || opts.scope == GradcheckScope::full) {
    auto more = encoder_checks(opts.seed);
    checks.insert(checks.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  if (opts.scope == GradcheckScope::full) {
    auto more = full_checks(opts.seed, opts.element_budget);
    checks.insert(checks.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  if (opts.corrupt) {
    Rng rng(opts.seed + 99);
    checks.push_back({"negative_control_corrupted_gelu",
                      [](const std::vector<Tensor>& in) { return gelu_wrong_backward(in[0]); },
                      {Tensor::randn({16}, rng, 1.0)}, {}});
  }

  bool all_ok = true;
  for (Check& check : checks) {
    const FdReport report = finite_difference_check(check.fn, check.inputs, check.opts);
    const bool ok = report.max_rel_error < opts.tolerance;
    all_ok = all_ok && ok;
    out << (ok ? "PASS" : "FAIL") << " " << check.name << "  max_rel_err=" << std::scientific
        << std::setprecision(3) << report.max_rel_error << "  elements=" << report.checked << "\n";
  }
  return all_ok;
}

}  // namespace clft
