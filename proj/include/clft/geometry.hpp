#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clft/common.hpp"

namespace clft {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct SensorRig {
  double roll = 0.0, pitch = 0.0, yaw = 0.0;  // camera frame Euler angles (rad)
  Vec3 camera_pos;                            // camera location in the LiDAR frame (m)
  double fx = 1.0, fy = 1.0;                  // focal lengths (px)
  int64_t width = 1, height = 1;              // image resolution (px)

  void validate() const;
};

using PointCloud = std::vector<Vec3>;

// Three h x w grids holding the camera-frame x/y/z of the point each pixel
// saw, plus an occupancy grid so a stored coordinate of exactly 0 stays
// distinguishable from an empty pixel. Depth ties on a pixel keep the
// earlier point; only a strictly smaller depth replaces.
struct PlaneStack {
  int64_t width = 0, height = 0;
  std::vector<double> xy, yz, xz;  // row-major [v][u]
  std::vector<uint8_t> occupancy;

  PlaneStack() = default;
  PlaneStack(int64_t w, int64_t h)
      : width(w), height(h),
        xy(static_cast<size_t>(w * h), 0.0),
        yz(static_cast<size_t>(w * h), 0.0),
        xz(static_cast<size_t>(w * h), 0.0),
        occupancy(static_cast<size_t>(w * h), 0) {}

  size_t idx(int64_t v, int64_t u) const { return static_cast<size_t>(v * width + u); }
  bool any_occupied() const;
};

enum class BoxClass { vehicle, human };
BoxClass box_class_from_string(const std::string& s);  // merges cyclist/pedestrian into human

struct Box3D {
  Vec3 center;
  Vec3 extents;    // length(x), width(y), height(z) before heading
  double heading = 0.0;  // yaw about the LiDAR z axis
  BoxClass cls = BoxClass::vehicle;

  void validate() const;
  bool contains(const Vec3& p) const;
};

// Mask codes: 0 background, 1 vehicle, 2 human, 255 void.
struct ClassMask {
  int64_t width = 0, height = 0;
  std::vector<uint8_t> codes;

  ClassMask() = default;
  ClassMask(int64_t w, int64_t h) : width(w), height(h), codes(static_cast<size_t>(w * h), 0) {}
  size_t idx(int64_t v, int64_t u) const { return static_cast<size_t>(v * width + u); }
};

constexpr uint8_t kBackground = 0;
constexpr uint8_t kVehicle = 1;
constexpr uint8_t kHuman = 2;
constexpr uint8_t kVoid = 255;

constexpr double kDepthEpsilon = 1e-6;

/// Rigid map into the camera frame: r.p.y.(p - c) with the roll/pitch/yaw
/// matrices applied in that order.
PointCloud transform_to_camera(const PointCloud& points, const SensorRig& rig);
Vec3 transform_point_to_camera(const Vec3& p, const SensorRig& rig);

struct Projection {
  double u = 0.0, v = 0.0, depth = 0.0;
  bool behind = false;  // depth <= kDepthEpsilon; u/v not meaningful
};

/// Pinhole projection of camera-frame points: u = fx*x/z + w/2, v = fy*y/z + h/2.
std::vector<Projection> project_to_image(const PointCloud& camera_points, const SensorRig& rig);
Projection project_point(const Vec3& p, const SensorRig& rig);

/// Transform + project + in-view filter + pixel population with a nearest-
/// depth z-buffer.
PlaneStack filter_and_populate(const PointCloud& cloud_lidar, const SensorRig& rig);

/// Nearest-occupied dilation: every empty pixel within Chebyshev distance
/// <= radius of occupied pixels copies its nearest occupied pixel, nearer
/// ring first; equal-distance ties prefer smaller depth, then row-major
/// neighborhood order. radius 0 is the identity.
PlaneStack densify(const PlaneStack& planes, int64_t radius);

ClassMask boxes_to_mask(const PointCloud& cloud_lidar, const std::vector<Box3D>& boxes, const SensorRig& rig);

// ------------------------------- file IO -----------------------------------

/// Text point cloud, one "x y z" triple per line.
PointCloud read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);

/// JSON array of {center, extents, heading, class}.
std::vector<Box3D> read_boxes(const std::filesystem::path& path);
void write_boxes(const std::filesystem::path& path, const std::vector<Box3D>& boxes);

SensorRig read_rig(const std::filesystem::path& path);
void write_rig(const std::filesystem::path& path, const SensorRig& rig);

}  // namespace clft
