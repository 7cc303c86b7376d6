#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "clft/evaluation.hpp"
#include "clft/geometry.hpp"
#include "clft/tensor.hpp"

namespace clft {

struct Frame {
  Tensor rgb;             // 3 x h x w, values in [0,1]
  PointCloud cloud;       // LiDAR frame
  std::vector<Box3D> boxes;
  PlaneStack planes_raw;  // radius-0 projection; densified at load/train time
  ClassMask mask;
  SubsetTag tag = SubsetTag::light_dry;
};

struct Dataset {
  SensorRig rig;
  std::vector<Frame> frames;
  std::string separability = "color";
  uint64_t seed = 0;
};

/// Directory layout: dataset.json manifest (rig, seed, separability, per-
/// frame subset tags) plus frame_%06d.{rgb,cloud,boxes} with the derived
/// planes (.planes/.occ) and masks (.mask) cached alongside.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);

/// Reads frames back; derives planes/masks through the geometry pipeline
/// when the cache files are missing (the adapter path for externally
/// converted data).
Dataset load_dataset(const std::filesystem::path& dir);

std::string frame_stem(int64_t index);

}  // namespace clft
