#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clft/evaluation.hpp"
#include "clft/geometry.hpp"
#include "clft/model.hpp"
#include "clft/training.hpp"

namespace clft {

/// JSON run configuration: model geometry, training hyperparameters, rig,
/// paths, modality, and subset tags. Validation is strict: unknown keys are
/// rejected at every level.
struct RunConfig {
  EncoderConfig model = EncoderConfig::preset(Variant::toy);
  int64_t d_hat = kDefaultDHat;
  TrainConfig train;
  std::optional<SensorRig> rig;
  std::string dataset_path;
  std::string out_path;
  Modality modality = Modality::fusion;
  std::vector<SubsetTag> subsets;  // empty = all

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_json_text(const std::string& text, const std::string& what);
};

}  // namespace clft
