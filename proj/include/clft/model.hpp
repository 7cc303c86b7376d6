#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "clft/assemble.hpp"
#include "clft/encoder.hpp"
#include "clft/fusion.hpp"
#include "clft/geometry.hpp"

namespace clft {

enum class Modality { camera, lidar, fusion };
Modality modality_from_string(const std::string& s);  // "C", "L", "C+L"
std::string modality_to_string(Modality m);

/// RGB image in [0,1] mapped to the fixed affine the encoders expect.
Tensor rgb_to_input(const Tensor& rgb);
/// PlaneStack stacked as a 3-channel image, each channel standardized over
/// its occupied pixels; empty pixels stay zero. An empty stack stays zero.
Tensor planes_to_input(const PlaneStack& planes);

// Two independent encoder streams, per-stream assembly, cross-fusion, head.
class ClftModel {
public:
  ClftModel() = default;
  ClftModel(EncoderConfig cfg, int64_t d_hat, uint64_t seed);

  const EncoderConfig& config() const { return cfg_; }
  int64_t d_hat() const { return cam_assemble_.d_hat; }

  /// Absent streams contribute nothing at the fusion sums. A LiDAR input
  /// with no occupied pixel counts as absent, which is what makes a zeroed
  /// PlaneStack bitwise identical to camera-only mode.
  Tensor forward(const Tensor* rgb, const PlaneStack* planes, Modality modality) const;
  /// Same graph on pre-normalized stream tensors (tests exercise this).
  Tensor forward_normalized(const Tensor* cam_input, const Tensor* lid_input) const;

  EncoderParams& cam_encoder() { return cam_encoder_; }
  EncoderParams& lid_encoder() { return lid_encoder_; }
  AssembleParams& cam_assemble() { return cam_assemble_; }
  AssembleParams& lid_assemble() { return lid_assemble_; }
  FusionParams& fusion() { return fusion_; }
  const FusionParams& fusion() const { return fusion_; }

  /// Deterministic enumeration of every learnable tensor.
  void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);
  void visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const;
  int64_t parameter_count() const;
  void zero_grads();

  void save(const std::filesystem::path& dir) const;
  static ClftModel load(const std::filesystem::path& dir);

private:
  EncoderConfig cfg_;
  EncoderParams cam_encoder_, lid_encoder_;
  AssembleParams cam_assemble_, lid_assemble_;
  FusionParams fusion_;
};

}  // namespace clft
