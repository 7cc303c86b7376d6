#include "clft/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace clft {

Separability separability_from_string(const std::string& s) {
  if (s == "color") return Separability::color;
  if (s == "depth") return Separability::depth;
  if (s == "joint") return Separability::joint;
  fail("separability: expected color, depth, or joint, got '" + s + "'");
}

std::string separability_to_string(Separability s) {
  switch (s) {
    case Separability::color: return "color";
    case Separability::depth: return "depth";
    case Separability::joint: return "joint";
  }
  fail("separability: bad value");
}

SensorRig synthetic_rig(int64_t width, int64_t height) {
  SensorRig rig;
  // r(-pi/2) p(0) y(-pi/2) maps world x->depth, y->-u, z->-v.
  rig.roll = -M_PI / 2.0;
  rig.pitch = 0.0;
  rig.yaw = -M_PI / 2.0;
  rig.camera_pos = {0.0, 0.0, 1.2};
  rig.fx = static_cast<double>(width);
  rig.fy = static_cast<double>(width);
  rig.width = width;
  rig.height = height;
  return rig;
}

namespace {

constexpr double kCamHeight = 1.2;

struct SceneObject {
  Box3D box;
  bool red = true;
  bool near = true;
  double azimuth = 0.0;
  double ang_w = 0.0, ang_h = 0.0;
};

struct Rect {
  int64_t u0, u1, v0, v1;  // half-open pixel bounds
};

// Front face of a heading-0 box projects to an axis-aligned rectangle under
// the synthetic rig.
Rect project_front_face(const Box3D& box, const SensorRig& rig) {
  const double face_x = box.center.x - box.extents.x * 0.5;
  Rect r{};
  double umin = 1e30, umax = -1e30, vmin = 1e30, vmax = -1e30;
  for (int sy = -1; sy <= 1; sy += 2)
    for (int sz = -1; sz <= 1; sz += 2) {
      const Vec3 corner{face_x, box.center.y + sy * box.extents.y * 0.5,
                        box.center.z + sz * box.extents.z * 0.5};
      const Projection pr = project_point(transform_point_to_camera(corner, rig), rig);
      if (pr.behind) continue;
      umin = std::min(umin, pr.u);
      umax = std::max(umax, pr.u);
      vmin = std::min(vmin, pr.v);
      vmax = std::max(vmax, pr.v);
    }
  r.u0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(umin)));
  r.u1 = std::min<int64_t>(rig.width, static_cast<int64_t>(std::ceil(umax)));
  r.v0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(vmin)));
  r.v1 = std::min<int64_t>(rig.height, static_cast<int64_t>(std::ceil(vmax)));
  return r;
}

void fill_object_pixels(Tensor& rgb, const Rect& r, int64_t w, double cr, double cg, double cb, Rng& rng) {
  const int64_t h = rgb.dim(1);
  double* red = rgb.data().data();
  double* green = red + h * w;
  double* blue = green + h * w;
  for (int64_t v = r.v0; v < r.v1; ++v)
    for (int64_t u = r.u0; u < r.u1; ++u) {
      const double shade = 1.0 - 0.15 * (static_cast<double>(v - r.v0) / std::max<int64_t>(1, r.v1 - r.v0));
      const double n = rng.uniform(-0.02, 0.02);
      red[v * w + u] = std::clamp(cr * shade + n, 0.0, 1.0);
      green[v * w + u] = std::clamp(cg * shade + n, 0.0, 1.0);
      blue[v * w + u] = std::clamp(cb * shade + n, 0.0, 1.0);
    }
}

}  // namespace

Dataset generate_synthetic(int64_t n, uint64_t seed, Separability mode, int64_t width, int64_t height) {
  if (n < 1) fail("generate_synthetic: n must be >= 1");
  Dataset data;
  data.rig = synthetic_rig(width, height);
  data.seed = seed;
  data.separability = separability_to_string(mode);
  Rng rng(seed);

  for (int64_t fi = 0; fi < n; ++fi) {
    Frame frame;
    frame.tag = kAllSubsets[static_cast<size_t>(fi % 4)];

    // --- objects ---
    const int64_t n_obj = 2 + rng.uniform_int(3);
    std::vector<SceneObject> objects;
    std::vector<std::pair<double, double>> taken;  // azimuth intervals
    for (int64_t oi = 0; oi < n_obj; ++oi) {
      SceneObject obj;
      obj.red = rng.uniform() < 0.5;
      obj.near = rng.uniform() < 0.5;
      const double dist = obj.near ? rng.uniform(5.0, 7.5) : rng.uniform(10.5, 14.0);
      obj.ang_w = rng.uniform(0.10, 0.22);
      obj.ang_h = rng.uniform(0.14, 0.26);
      bool placed = false;
      for (int attempt = 0; attempt < 24 && !placed; ++attempt) {
        obj.azimuth = rng.uniform(-0.30, 0.30);
        const double lo = obj.azimuth - obj.ang_w * 0.5 - 0.02;
        const double hi = obj.azimuth + obj.ang_w * 0.5 + 0.02;
        placed = true;
        for (const auto& [tl, th] : taken)
          if (lo < th && tl < hi) {
            placed = false;
            break;
          }
        if (placed) taken.emplace_back(lo, hi);
      }
      if (!placed) continue;
      const double elevation = rng.uniform(-0.05, 0.05);
      obj.box.center = {dist, -dist * std::tan(obj.azimuth), kCamHeight + dist * std::tan(elevation)};
      obj.box.extents = {0.3, dist * obj.ang_w, dist * obj.ang_h};
      obj.box.heading = 0.0;
      bool vehicle = false;
      switch (mode) {
        case Separability::color: vehicle = obj.red; break;
        case Separability::depth: vehicle = obj.near; break;
        case Separability::joint: vehicle = obj.red == obj.near; break;
      }
      obj.box.cls = vehicle ? BoxClass::vehicle : BoxClass::human;
      objects.push_back(obj);
      frame.boxes.push_back(obj.box);
    }

    // --- point cloud: object front faces, ground grid, behind-camera strays ---
    for (const SceneObject& obj : objects) {
      const double face_x = obj.box.center.x - obj.box.extents.x * 0.5;
      const double px_w = data.rig.fx * obj.ang_w;
      const double px_h = data.rig.fy * obj.ang_h;
      const int64_t count = std::clamp<int64_t>(static_cast<int64_t>(2.5 * px_w * px_h), 64, 1500);
      for (int64_t k = 0; k < count; ++k) {
        frame.cloud.push_back({face_x + rng.uniform(0.0, 0.05),
                               obj.box.center.y + rng.uniform(-0.499, 0.499) * obj.box.extents.y,
                               obj.box.center.z + rng.uniform(-0.499, 0.499) * obj.box.extents.z});
      }
    }
    for (double gx = 3.0; gx < 18.0; gx += 0.35)
      for (double gy = -8.0; gy <= 8.0; gy += 0.35)
        frame.cloud.push_back({gx + rng.uniform(-0.1, 0.1), gy + rng.uniform(-0.1, 0.1),
                               rng.uniform(0.0, 0.02)});
    for (int k = 0; k < 20; ++k)
      frame.cloud.push_back({rng.uniform(-12.0, -1.0), rng.uniform(-6.0, 6.0), rng.uniform(0.0, 3.0)});

    // --- RGB: sky/ground gradient, then objects far to near ---
    frame.rgb = Tensor({3, height, width});
    {
      double* red = frame.rgb.data().data();
      double* green = red + height * width;
      double* blue = green + height * width;
      for (int64_t v = 0; v < height; ++v) {
        const double t = static_cast<double>(v) / static_cast<double>(height);
        const bool sky = v < height / 2;
        const double base_r = sky ? 0.55 - 0.15 * t : 0.33 - 0.05 * t;
        const double base_g = sky ? 0.60 - 0.15 * t : 0.31 - 0.05 * t;
        const double base_b = sky ? 0.66 - 0.15 * t : 0.29 - 0.05 * t;
        for (int64_t u = 0; u < width; ++u) {
          const double noise = rng.uniform(-0.015, 0.015);
          red[v * width + u] = std::clamp(base_r + noise, 0.0, 1.0);
          green[v * width + u] = std::clamp(base_g + noise, 0.0, 1.0);
          blue[v * width + u] = std::clamp(base_b + noise, 0.0, 1.0);
        }
      }
    }
    std::vector<size_t> order(objects.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&objects](size_t a, size_t b) {
      return objects[a].box.center.x > objects[b].box.center.x;  // far first
    });
    for (size_t oi : order) {
      const SceneObject& obj = objects[oi];
      const Rect r = project_front_face(obj.box, data.rig);
      const double cr = obj.red ? 0.78 : 0.16;
      const double cg = 0.16;
      const double cb = obj.red ? 0.16 : 0.78;
      fill_object_pixels(frame.rgb, r, width, cr, cg, cb, rng);
    }
    // Weather/illumination texture for the subset tags.
    const bool dark = frame.tag == SubsetTag::dark_dry || frame.tag == SubsetTag::dark_wet;
    const bool wet = frame.tag == SubsetTag::light_wet || frame.tag == SubsetTag::dark_wet;
    if (dark || wet) {
      for (int64_t i = 0; i < frame.rgb.size(); ++i) {
        double v = frame.rgb.data()[static_cast<size_t>(i)];
        if (dark) v *= 0.55;
        if (wet) v = std::clamp(v + rng.uniform(-0.03, 0.03), 0.0, 1.0);
        frame.rgb.data()[static_cast<size_t>(i)] = v;
      }
    }

    frame.planes_raw = filter_and_populate(frame.cloud, data.rig);
    frame.mask = boxes_to_mask(frame.cloud, frame.boxes, data.rig);
    data.frames.push_back(std::move(frame));
  }
  return data;
}

}  // namespace clft
