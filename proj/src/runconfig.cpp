#include "clft/runconfig.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace clft {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) fail("config: unknown key '" + it.key() + "' in " + where);
}

void parse_model(const json& j, RunConfig& cfg) {
  reject_unknown(j, {"variant", "patch", "depth", "dim", "heads", "taps", "input", "d_hat"}, "model");
  if (!j.contains("variant")) fail("config: model.variant is required");
  cfg.model = EncoderConfig::preset(variant_from_string(j.at("variant").get<std::string>()));
  if (j.contains("patch")) cfg.model.patch = j.at("patch").get<int64_t>();
  if (j.contains("depth")) cfg.model.depth = j.at("depth").get<int64_t>();
  if (j.contains("dim")) cfg.model.dim = j.at("dim").get<int64_t>();
  if (j.contains("heads")) cfg.model.heads = j.at("heads").get<int64_t>();
  if (j.contains("taps")) {
    const auto& taps = j.at("taps");
    if (!taps.is_array() || taps.size() != 4) fail("config: model.taps must be an array of 4 layer indices");
    for (size_t i = 0; i < 4; ++i) cfg.model.taps[i] = taps.at(i).get<int64_t>();
  }
  if (j.contains("input")) {
    const auto& in = j.at("input");
    if (!in.is_array() || in.size() != 2) fail("config: model.input must be [h, w]");
    cfg.model.input_h = in.at(0).get<int64_t>();
    cfg.model.input_w = in.at(1).get<int64_t>();
  }
  if (j.contains("d_hat")) cfg.d_hat = j.at("d_hat").get<int64_t>();
  cfg.model.validate();
  if (cfg.d_hat <= 0) fail("config: model.d_hat must be positive");
}

void parse_train(const json& j, RunConfig& cfg) {
  reject_unknown(j,
                 {"lr0", "alpha", "batch", "class_weights", "max_epochs", "patience", "seed", "augment",
                  "dilate_radius"},
                 "train");
  TrainConfig& t = cfg.train;
  if (j.contains("lr0")) t.lr0 = j.at("lr0").get<double>();
  if (j.contains("alpha")) t.alpha = j.at("alpha").get<double>();
  if (j.contains("batch")) t.batch = j.at("batch").get<int64_t>();
  if (j.contains("class_weights")) {
    const auto& w = j.at("class_weights");
    if (w.is_string()) {
      if (w.get<std::string>() != "auto") fail("config: train.class_weights must be \"auto\" or 3 numbers");
    } else {
      if (!w.is_array() || w.size() != 3) fail("config: train.class_weights must be \"auto\" or 3 numbers");
      std::array<double, 3> arr{w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()};
      t.class_weights = arr;
    }
  }
  if (j.contains("max_epochs")) t.max_epochs = j.at("max_epochs").get<int64_t>();
  if (j.contains("patience")) t.patience = j.at("patience").get<int64_t>();
  if (j.contains("seed")) t.seed = j.at("seed").get<uint64_t>();
  if (j.contains("augment")) t.augment = j.at("augment").get<bool>();
  if (j.contains("dilate_radius")) t.dilate_radius = j.at("dilate_radius").get<int64_t>();
  t.validate();
}

SensorRig parse_rig(const json& j) {
  reject_unknown(j, {"euler", "camera_pos", "focal", "resolution"}, "rig");
  SensorRig rig;
  const auto& euler = j.at("euler");
  rig.roll = euler.at(0).get<double>();
  rig.pitch = euler.at(1).get<double>();
  rig.yaw = euler.at(2).get<double>();
  const auto& pos = j.at("camera_pos");
  rig.camera_pos = {pos.at(0).get<double>(), pos.at(1).get<double>(), pos.at(2).get<double>()};
  const auto& focal = j.at("focal");
  rig.fx = focal.at(0).get<double>();
  rig.fy = focal.at(1).get<double>();
  const auto& res = j.at("resolution");
  rig.width = res.at(0).get<int64_t>();
  rig.height = res.at(1).get<int64_t>();
  rig.validate();
  return rig;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail("config: invalid JSON in " + what + ": " + e.what());
  }
  if (!j.is_object()) fail("config: top level must be an object in " + what);
  reject_unknown(j, {"model", "train", "rig", "paths", "modality", "subsets"}, "top level");

  RunConfig cfg;
  if (!j.contains("model")) fail("config: 'model' section is required");
  parse_model(j.at("model"), cfg);
  if (j.contains("train")) parse_train(j.at("train"), cfg);
  if (j.contains("rig")) cfg.rig = parse_rig(j.at("rig"));
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    reject_unknown(p, {"dataset", "out"}, "paths");
    if (p.contains("dataset")) cfg.dataset_path = p.at("dataset").get<std::string>();
    if (p.contains("out")) cfg.out_path = p.at("out").get<std::string>();
  }
  if (j.contains("modality")) cfg.modality = modality_from_string(j.at("modality").get<std::string>());
  if (j.contains("subsets")) {
    for (const auto& s : j.at("subsets")) cfg.subsets.push_back(subset_from_string(s.get<std::string>()));
    if (cfg.subsets.empty()) fail("config: subsets, when given, must not be empty");
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail("config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return from_json_text(text, path.string());
}

}  // namespace clft
