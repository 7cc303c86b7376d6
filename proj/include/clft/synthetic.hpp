#pragma once

#include "clft/dataset.hpp"

namespace clft {

enum class Separability { color, depth, joint };
Separability separability_from_string(const std::string& s);
std::string separability_to_string(Separability s);

/// Rig used for generated scenes: automotive world frame (x forward, y left,
/// z up) with the camera 1.2 m up looking along +x.
SensorRig synthetic_rig(int64_t width, int64_t height);

/// Colored floating cuboids over a ground plane, rendered to RGB and emitted
/// as surface point clouds. Class wiring per mode:
///   color — class follows the box color alone;
///   depth — class follows the distance band alone;
///   joint — class is decidable only from color AND distance together
///           (each alone is a coin flip by construction).
/// Objects keep a fixed angular size so the camera cannot read distance.
Dataset generate_synthetic(int64_t n, uint64_t seed, Separability mode, int64_t width = 96,
                           int64_t height = 96);

}  // namespace clft
