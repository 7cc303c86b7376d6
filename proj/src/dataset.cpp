#include "clft/dataset.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "clft/serialize.hpp"

namespace clft {

std::string frame_stem(int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06lld", static_cast<long long>(index));
  return buf;
}

namespace {

Tensor mask_to_tensor(const ClassMask& mask) {
  Tensor t({mask.height, mask.width});
  for (size_t i = 0; i < mask.codes.size(); ++i) t.data()[i] = static_cast<double>(mask.codes[i]);
  return t;
}

ClassMask tensor_to_mask(const Tensor& t, const std::string& what) {
  if (t.rank() != 2) fail("mask: expected rank-2 tensor in " + what);
  ClassMask mask(t.dim(1), t.dim(0));
  for (size_t i = 0; i < mask.codes.size(); ++i) {
    const double v = t.data()[i];
    if (v != 0.0 && v != 1.0 && v != 2.0 && v != 255.0)
      fail("mask: invalid code " + std::to_string(v) + " in " + what);
    mask.codes[i] = static_cast<uint8_t>(v);
  }
  return mask;
}

Tensor planes_to_tensor(const PlaneStack& planes) {
  Tensor t({3, planes.height, planes.width});
  const int64_t hw = planes.width * planes.height;
  std::copy(planes.xy.begin(), planes.xy.end(), t.data().begin());
  std::copy(planes.yz.begin(), planes.yz.end(), t.data().begin() + hw);
  std::copy(planes.xz.begin(), planes.xz.end(), t.data().begin() + 2 * hw);
  return t;
}

PlaneStack tensors_to_planes(const Tensor& grids, const Tensor& occ, const std::string& what) {
  if (grids.rank() != 3 || grids.dim(0) != 3) fail("planes: expected 3 x h x w tensor in " + what);
  PlaneStack planes(grids.dim(2), grids.dim(1));
  const int64_t hw = planes.width * planes.height;
  if (occ.rank() != 2 || occ.dim(0) != planes.height || occ.dim(1) != planes.width)
    fail("planes: occupancy extents mismatch in " + what);
  std::copy(grids.data().begin(), grids.data().begin() + hw, planes.xy.begin());
  std::copy(grids.data().begin() + hw, grids.data().begin() + 2 * hw, planes.yz.begin());
  std::copy(grids.data().begin() + 2 * hw, grids.data().end(), planes.xz.begin());
  for (int64_t i = 0; i < hw; ++i) planes.occupancy[static_cast<size_t>(i)] = occ.data()[static_cast<size_t>(i)] != 0.0;
  return planes;
}

nlohmann::ordered_json rig_to_json(const SensorRig& rig) {
  nlohmann::ordered_json j;
  j["euler"] = {rig.roll, rig.pitch, rig.yaw};
  j["camera_pos"] = {rig.camera_pos.x, rig.camera_pos.y, rig.camera_pos.z};
  j["focal"] = {rig.fx, rig.fy};
  j["resolution"] = {rig.width, rig.height};
  return j;
}

SensorRig rig_from_json(const nlohmann::json& j) {
  SensorRig rig;
  rig.roll = j.at("euler").at(0).get<double>();
  rig.pitch = j.at("euler").at(1).get<double>();
  rig.yaw = j.at("euler").at(2).get<double>();
  rig.camera_pos = {j.at("camera_pos").at(0).get<double>(), j.at("camera_pos").at(1).get<double>(),
                    j.at("camera_pos").at(2).get<double>()};
  rig.fx = j.at("focal").at(0).get<double>();
  rig.fy = j.at("focal").at(1).get<double>();
  rig.width = j.at("resolution").at(0).get<int64_t>();
  rig.height = j.at("resolution").at(1).get<int64_t>();
  rig.validate();
  return rig;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["frames"] = data.frames.size();
  manifest["seed"] = data.seed;
  manifest["separability"] = data.separability;
  manifest["rig"] = rig_to_json(data.rig);
  nlohmann::ordered_json tags = nlohmann::ordered_json::array();
  for (const Frame& f : data.frames) tags.push_back(subset_to_string(f.tag));
  manifest["tags"] = tags;
  {
    std::ofstream os(dir / "dataset.json");
    if (!os) fail("dataset: cannot write manifest in " + dir.string());
    os << manifest.dump(2) << "\n";
  }
  for (size_t i = 0; i < data.frames.size(); ++i) {
    const Frame& f = data.frames[i];
    const std::string stem = frame_stem(static_cast<int64_t>(i));
    write_tensor_file(dir / (stem + ".rgb"), f.rgb);
    write_point_cloud(dir / (stem + ".cloud"), f.cloud);
    write_boxes(dir / (stem + ".boxes"), f.boxes);
    write_tensor_file(dir / (stem + ".planes"), planes_to_tensor(f.planes_raw));
    Tensor occ({f.planes_raw.height, f.planes_raw.width});
    for (size_t k = 0; k < f.planes_raw.occupancy.size(); ++k)
      occ.data()[k] = static_cast<double>(f.planes_raw.occupancy[k]);
    write_tensor_file(dir / (stem + ".occ"), occ);
    write_tensor_file(dir / (stem + ".mask"), mask_to_tensor(f.mask));
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream is(dir / "dataset.json");
  if (!is) fail("dataset: cannot open manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const std::exception& e) {
    fail("dataset: invalid manifest JSON: " + std::string(e.what()));
  }
  Dataset data;
  data.rig = rig_from_json(manifest.at("rig"));
  data.seed = manifest.value("seed", 0ull);
  data.separability = manifest.value("separability", std::string("color"));
  const int64_t n = manifest.at("frames").get<int64_t>();
  std::vector<std::string> tags;
  if (manifest.contains("tags"))
    for (const auto& t : manifest.at("tags")) tags.push_back(t.get<std::string>());

  data.frames.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const std::string stem = frame_stem(i);
    Frame f;
    f.rgb = read_tensor_file(dir / (stem + ".rgb"));
    if (f.rgb.rank() != 3 || f.rgb.dim(0) != 3) fail("dataset: " + stem + ".rgb is not a 3 x h x w tensor");
    f.cloud = read_point_cloud(dir / (stem + ".cloud"));
    f.boxes = read_boxes(dir / (stem + ".boxes"));
    const auto planes_path = dir / (stem + ".planes");
    const auto occ_path = dir / (stem + ".occ");
    if (std::filesystem::exists(planes_path) && std::filesystem::exists(occ_path)) {
      f.planes_raw = tensors_to_planes(read_tensor_file(planes_path), read_tensor_file(occ_path), stem);
    } else {
      f.planes_raw = filter_and_populate(f.cloud, data.rig);
    }
    const auto mask_path = dir / (stem + ".mask");
    if (std::filesystem::exists(mask_path)) {
      f.mask = tensor_to_mask(read_tensor_file(mask_path), stem);
    } else {
      f.mask = boxes_to_mask(f.cloud, f.boxes, data.rig);
    }
    f.tag = i < static_cast<int64_t>(tags.size()) ? subset_from_string(tags[static_cast<size_t>(i)])
                                                  : SubsetTag::light_dry;
    data.frames.push_back(std::move(f));
  }
  return data;
}

}  // namespace clft
