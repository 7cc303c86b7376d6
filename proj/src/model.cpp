#include "clft/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "clft/serialize.hpp"

namespace clft {

Modality modality_from_string(const std::string& s) {
  if (s == "C") return Modality::camera;
  if (s == "L") return Modality::lidar;
  if (s == "C+L") return Modality::fusion;
  fail("modality: expected one of C, L, C+L, got '" + s + "'");
}

std::string modality_to_string(Modality m) {
  switch (m) {
    case Modality::camera: return "C";
    case Modality::lidar: return "L";
    case Modality::fusion: return "C+L";
  }
  fail("modality: bad value");
}

Tensor rgb_to_input(const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) fail("rgb_to_input: 3 x h x w image required, got " + shape_str(rgb.shape()));
  Tensor out(rgb.shape());
  const int64_t n = rgb.size();
  for (int64_t i = 0; i < n; ++i) out.data()[static_cast<size_t>(i)] = (rgb.data()[static_cast<size_t>(i)] - 0.5) * 2.0;
  return out;
}

Tensor planes_to_input(const PlaneStack& planes) {
  const int64_t hw = planes.width * planes.height;
  Tensor out({3, planes.height, planes.width});
  const std::vector<double>* grids[3] = {&planes.xy, &planes.yz, &planes.xz};
  int64_t occupied = 0;
  for (uint8_t o : planes.occupancy) occupied += o;
  for (int c = 0; c < 3; ++c) {
    const std::vector<double>& g = *grids[c];
    double* dst = out.data().data() + c * hw;
    if (occupied == 0) continue;
    double mean = 0.0;
    for (int64_t i = 0; i < hw; ++i)
      if (planes.occupancy[static_cast<size_t>(i)]) mean += g[static_cast<size_t>(i)];
    mean /= static_cast<double>(occupied);
    double var = 0.0;
    for (int64_t i = 0; i < hw; ++i)
      if (planes.occupancy[static_cast<size_t>(i)]) {
        const double d = g[static_cast<size_t>(i)] - mean;
        var += d * d;
      }
    var /= static_cast<double>(occupied);
    const double inv_std = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (int64_t i = 0; i < hw; ++i)
      if (planes.occupancy[static_cast<size_t>(i)]) dst[i] = (g[static_cast<size_t>(i)] - mean) * inv_std;
  }
  return out;
}

ClftModel::ClftModel(EncoderConfig cfg, int64_t d_hat, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.input_h % 32 != 0 || cfg_.input_w % 32 != 0)
    fail("model: input extents must be divisible by 32 for the s = {4,8,16,32} pyramid");
  Rng rng(seed);
  cam_encoder_ = EncoderParams::init(cfg_, rng);
  lid_encoder_ = EncoderParams::init(cfg_, rng);
  cam_assemble_ = AssembleParams::init(cfg_, d_hat, rng);
  lid_assemble_ = AssembleParams::init(cfg_, d_hat, rng);
  fusion_ = FusionParams::init(d_hat, 3, rng);
}

Tensor ClftModel::forward_normalized(const Tensor* cam_input, const Tensor* lid_input) const {
  if (!cam_input && !lid_input) fail("forward: at least one stream required");
  std::array<Tensor, 4> cam_maps, lid_maps;
  if (cam_input) cam_maps = assemble_all(encode(*cam_input, cfg_, cam_encoder_), cam_assemble_, cfg_);
  if (lid_input) lid_maps = assemble_all(encode(*lid_input, cfg_, lid_encoder_), lid_assemble_, cfg_);

  Tensor prev;
  for (int stage = 3; stage >= 0; --stage) {
    const Tensor* cam = cam_input ? &cam_maps[static_cast<size_t>(stage)] : nullptr;
    const Tensor* lid = lid_input ? &lid_maps[static_cast<size_t>(stage)] : nullptr;
    prev = fuse_block(cam, lid, prev.defined() ? &prev : nullptr,
                      fusion_.blocks[static_cast<size_t>(stage)]);
  }
  return segmentation_head(prev, fusion_.head);
}

Tensor ClftModel::forward(const Tensor* rgb, const PlaneStack* planes, Modality modality) const {
  const bool want_cam = modality == Modality::camera || modality == Modality::fusion;
  const bool want_lid = modality == Modality::lidar || modality == Modality::fusion;
  if (want_cam && !rgb) fail("forward: modality " + modality_to_string(modality) + " requires an RGB input");
  if (modality == Modality::lidar && !planes) fail("forward: modality L requires a LiDAR input");

  Tensor cam_input, lid_input;
  if (want_cam) cam_input = rgb_to_input(*rgb);
  // A stack with no occupied pixel carries no information; treat it as an
  // absent stream so the branch is skipped entirely. This is what makes
  // C+L with zeroed planes identical to camera-only mode.
  const bool lid_active = want_lid && planes != nullptr && planes->any_occupied();
  if (modality == Modality::lidar && !lid_active)
    fail("forward: modality L requires a non-empty LiDAR input");
  if (lid_active) {
    if (planes->width != cfg_.input_w || planes->height != cfg_.input_h)
      fail("forward: plane extents " + std::to_string(planes->width) + "x" + std::to_string(planes->height) +
           " do not match configured input");
    lid_input = planes_to_input(*planes);
  }
  return forward_normalized(want_cam ? &cam_input : nullptr, lid_active ? &lid_input : nullptr);
}

void ClftModel::visit_params(const std::function<void(const std::string&, Tensor&)>& fn) {
  auto stream = [&](const std::string& prefix, EncoderParams& enc, AssembleParams& asmp) {
    if (cfg_.hybrid_stem()) {
      fn(prefix + ".stem.w1", enc.stem_w1);
      fn(prefix + ".stem.b1", enc.stem_b1);
      fn(prefix + ".stem.w2", enc.stem_w2);
      fn(prefix + ".stem.b2", enc.stem_b2);
      fn(prefix + ".stem.w3", enc.stem_w3);
      fn(prefix + ".stem.b3", enc.stem_b3);
    } else {
      fn(prefix + ".patch.w", enc.patch_w);
      fn(prefix + ".patch.b", enc.patch_b);
    }
    fn(prefix + ".cls_token", enc.cls_token);
    fn(prefix + ".pos_emb", enc.pos_emb);
    for (size_t i = 0; i < enc.layers.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), ".layer%02zu.", i);
      const std::string lp = prefix + buf;
      LayerParams& l = enc.layers[i];
      fn(lp + "ln1.g", l.ln1_g);
      fn(lp + "ln1.b", l.ln1_b);
      fn(lp + "attn.wq", l.wq);
      fn(lp + "attn.bq", l.bq);
      fn(lp + "attn.wk", l.wk);
      fn(lp + "attn.bk", l.bk);
      fn(lp + "attn.wv", l.wv);
      fn(lp + "attn.bv", l.bv);
      fn(lp + "attn.wo", l.wo);
      fn(lp + "attn.bo", l.bo);
      fn(lp + "ln2.g", l.ln2_g);
      fn(lp + "ln2.b", l.ln2_b);
      fn(lp + "mlp.w1", l.w1);
      fn(lp + "mlp.b1", l.b1);
      fn(lp + "mlp.w2", l.w2);
      fn(lp + "mlp.b2", l.b2);
    }
    for (size_t i = 0; i < 4; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), ".stage%zu.", i);
      const std::string sp = prefix + buf;
      AssembleStageParams& st = asmp.stages[i];
      fn(sp + "readout.w", st.readout_w);
      fn(sp + "readout.b", st.readout_b);
      fn(sp + "proj.w", st.proj_w);
      fn(sp + "proj.b", st.proj_b);
      if (st.res_w.defined()) {
        fn(sp + "resample.w", st.res_w);
        fn(sp + "resample.b", st.res_b);
      }
    }
  };
  stream("cam", cam_encoder_, cam_assemble_);
  stream("lid", lid_encoder_, lid_assemble_);
  for (size_t i = 0; i < 4; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fusion.block%zu.", i);
    const std::string bp = buf;
    FusionBlockParams& b = fusion_.blocks[i];
    auto rcu_pair = [&](const std::string& name, RcuParams& r) {
      fn(bp + name + ".w1", r.w1);
      fn(bp + name + ".w2", r.w2);
    };
    rcu_pair("cam_rcu1", b.cam_rcu1);
    rcu_pair("cam_rcu2", b.cam_rcu2);
    rcu_pair("lid_rcu1", b.lid_rcu1);
    rcu_pair("lid_rcu2", b.lid_rcu2);
    rcu_pair("post_rcu", b.post_rcu);
    fn(bp + "up.w", b.up_w);
    fn(bp + "up.b", b.up_b);
  }
  fn("head.up.w", fusion_.head.up_w);
  fn("head.up.b", fusion_.head.up_b);
  fn("head.cls.w", fusion_.head.cls_w);
  fn("head.cls.b", fusion_.head.cls_b);
}

void ClftModel::visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<ClftModel*>(this)->visit_params(
      [&fn](const std::string& name, Tensor& t) { fn(name, t); });
}

int64_t ClftModel::parameter_count() const {
  int64_t n = 0;
  visit_params([&n](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

void ClftModel::zero_grads() {
  visit_params([](const std::string&, Tensor& t) { t.zero_grad(); });
}

void ClftModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["variant"] = variant_to_string(cfg_.variant);
  manifest["patch"] = cfg_.patch;
  manifest["depth"] = cfg_.depth;
  manifest["dim"] = cfg_.dim;
  manifest["heads"] = cfg_.heads;
  manifest["taps"] = cfg_.taps;
  manifest["input"] = {cfg_.input_h, cfg_.input_w};
  std::ofstream os(dir / "manifest.json");
  if (!os) fail("checkpoint: cannot write manifest in " + dir.string());
  os << manifest.dump(2) << "\n";
  os.close();
  visit_params([&dir](const std::string& name, const Tensor& t) {
    write_tensor_file(dir / (name + ".clft"), t);
  });
}

ClftModel ClftModel::load(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) fail("checkpoint: cannot open manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const std::exception& e) {
    fail("checkpoint: invalid manifest JSON: " + std::string(e.what()));
  }
  EncoderConfig cfg;
  cfg.variant = variant_from_string(manifest.at("variant").get<std::string>());
  cfg.patch = manifest.at("patch").get<int64_t>();
  cfg.depth = manifest.at("depth").get<int64_t>();
  cfg.dim = manifest.at("dim").get<int64_t>();
  cfg.heads = manifest.at("heads").get<int64_t>();
  const auto& taps = manifest.at("taps");
  for (size_t i = 0; i < 4; ++i) cfg.taps[i] = taps.at(i).get<int64_t>();
  cfg.input_h = manifest.at("input").at(0).get<int64_t>();
  cfg.input_w = manifest.at("input").at(1).get<int64_t>();
  cfg.validate();

  // DHat is recoverable from the stored projection conv weights, which keeps
  // the manifest to its fixed schema.
  const Tensor probe = read_tensor_file(dir / "cam.stage0.proj.w.clft");
  const int64_t d_hat = probe.dim(0);

  ClftModel model(cfg, d_hat, 0);
  model.visit_params([&dir](const std::string& name, Tensor& t) {
    const Tensor loaded = read_tensor_file(dir / (name + ".clft"));
    if (loaded.shape() != t.shape())
      fail("checkpoint: tensor " + name + " has shape " + shape_str(loaded.shape()) + ", expected " +
           shape_str(t.shape()));
    t.data() = loaded.data();
  });
  return model;
}

}  // namespace clft
