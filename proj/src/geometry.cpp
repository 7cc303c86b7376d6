#include "clft/geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace clft {

namespace {

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void SensorRig::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) fail("rig: focal lengths must be positive");
  if (width <= 0 || height <= 0) fail("rig: resolution must be positive");
  if (!finite(roll) || !finite(pitch) || !finite(yaw)) fail("rig: Euler angles must be finite");
  if (!finite(camera_pos.x) || !finite(camera_pos.y) || !finite(camera_pos.z))
    fail("rig: camera position must be finite");
}

bool PlaneStack::any_occupied() const {
  for (uint8_t o : occupancy)
    if (o) return true;
  return false;
}

BoxClass box_class_from_string(const std::string& s) {
  if (s == "vehicle") return BoxClass::vehicle;
  if (s == "human" || s == "pedestrian" || s == "cyclist") return BoxClass::human;
  fail("box: unknown class '" + s + "'");
}

void Box3D::validate() const {
  if (!(extents.x > 0.0) || !(extents.y > 0.0) || !(extents.z > 0.0)) fail("box: extents must be positive");
}

bool Box3D::contains(const Vec3& p) const {
  const double dx = p.x - center.x;
  const double dy = p.y - center.y;
  const double dz = p.z - center.z;
  // Undo the heading (yaw about z) to test in the box frame.
  const double c = std::cos(heading), s = std::sin(heading);
  const double bx = c * dx + s * dy;
  const double by = -s * dx + c * dy;
  return std::abs(bx) <= extents.x * 0.5 && std::abs(by) <= extents.y * 0.5 && std::abs(dz) <= extents.z * 0.5;
}

Vec3 transform_point_to_camera(const Vec3& p, const SensorRig& rig) {
  const double cr = std::cos(rig.roll), sr = std::sin(rig.roll);
  const double cp = std::cos(rig.pitch), sp = std::sin(rig.pitch);
  const double cy = std::cos(rig.yaw), sy = std::sin(rig.yaw);
  const double dx = p.x - rig.camera_pos.x;
  const double dy = p.y - rig.camera_pos.y;
  const double dz = p.z - rig.camera_pos.z;
  // The printed matrices applied in written order: yaw about z, pitch about
  // y, roll about x. Kept as sequential matrix-vector products so the
  // arithmetic matches the per-point reference used in tests exactly.
  const double yx = cy * dx + sy * dy;
  const double yy = -sy * dx + cy * dy;
  const double yz = dz;
  const double px = cp * yx - sp * yz;
  const double py = yy;
  const double pz = sp * yx + cp * yz;
  return {px, cr * py + sr * pz, -sr * py + cr * pz};
}

PointCloud transform_to_camera(const PointCloud& points, const SensorRig& rig) {
  rig.validate();
  PointCloud out(points.size());
#pragma omp parallel for schedule(static) if (points.size() > 4096)
  for (int64_t i = 0; i < static_cast<int64_t>(points.size()); ++i)
    out[static_cast<size_t>(i)] = transform_point_to_camera(points[static_cast<size_t>(i)], rig);
  return out;
}

Projection project_point(const Vec3& p, const SensorRig& rig) {
  Projection pr;
  pr.depth = p.z;
  if (p.z <= kDepthEpsilon) {
    pr.behind = true;
    return pr;
  }
  pr.u = rig.fx * (p.x / p.z) + static_cast<double>(rig.width) * 0.5;
  pr.v = rig.fy * (p.y / p.z) + static_cast<double>(rig.height) * 0.5;
  return pr;
}

std::vector<Projection> project_to_image(const PointCloud& camera_points, const SensorRig& rig) {
  rig.validate();
  std::vector<Projection> out(camera_points.size());
#pragma omp parallel for schedule(static) if (camera_points.size() > 4096)
  for (int64_t i = 0; i < static_cast<int64_t>(camera_points.size()); ++i)
    out[static_cast<size_t>(i)] = project_point(camera_points[static_cast<size_t>(i)], rig);
  return out;
}

PlaneStack filter_and_populate(const PointCloud& cloud_lidar, const SensorRig& rig) {
  rig.validate();
  const PointCloud cam = transform_to_camera(cloud_lidar, rig);
  const std::vector<Projection> proj = project_to_image(cam, rig);

  PlaneStack planes(rig.width, rig.height);
  std::vector<double> best_depth(static_cast<size_t>(rig.width * rig.height), 0.0);
  for (size_t i = 0; i < proj.size(); ++i) {
    const Projection& pr = proj[i];
    if (pr.behind) continue;
    if (!(pr.u >= 0.0 && pr.u < static_cast<double>(rig.width))) continue;
    if (!(pr.v >= 0.0 && pr.v < static_cast<double>(rig.height))) continue;
    const int64_t u = static_cast<int64_t>(pr.u);
    const int64_t v = static_cast<int64_t>(pr.v);
    const size_t at = planes.idx(v, u);
    if (planes.occupancy[at] && best_depth[at] <= pr.depth) continue;
    planes.occupancy[at] = 1;
    best_depth[at] = pr.depth;
    planes.xy[at] = cam[i].x;
    planes.yz[at] = cam[i].y;
    planes.xz[at] = cam[i].z;
  }
  return planes;
}

PlaneStack densify(const PlaneStack& planes, int64_t radius) {
  if (radius < 0) fail("densify: radius must be >= 0");
  if (radius == 0) return planes;
  PlaneStack out = planes;
  const int64_t w = planes.width, h = planes.height;
#pragma omp parallel for schedule(static)
  for (int64_t v = 0; v < h; ++v) {
    for (int64_t u = 0; u < w; ++u) {
      const size_t at = planes.idx(v, u);
      if (planes.occupancy[at]) continue;
      bool found = false;
      size_t best = 0;
      for (int64_t d = 1; d <= radius && !found; ++d) {
        // Row-major scan of the Chebyshev ring at distance d.
        double best_dep = 0.0;
        for (int64_t dv = -d; dv <= d; ++dv) {
          const int64_t vv = v + dv;
          if (vv < 0 || vv >= h) continue;
          const int64_t step = (dv == -d || dv == d) ? 1 : 2 * d;
          for (int64_t du = -d; du <= d; du += step) {
            const int64_t uu = u + du;
            if (uu < 0 || uu >= w) continue;
            const size_t cand = planes.idx(vv, uu);
            if (!planes.occupancy[cand]) continue;
            if (!found || planes.xz[cand] < best_dep) {
              found = true;
              best = cand;
              best_dep = planes.xz[cand];
            }
          }
        }
        if (found) break;
      }
      if (found) {
        out.occupancy[at] = 1;
        out.xy[at] = planes.xy[best];
        out.yz[at] = planes.yz[best];
        out.xz[at] = planes.xz[best];
      }
    }
  }
  return out;
}

namespace {

// Convex hull (monotone chain) of projected box corners, then a point-in-
// polygon scan over the hull's bounding box.
struct P2 {
  double x, y;
};

double cross(const P2& o, const P2& a, const P2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::vector<P2> convex_hull(std::vector<P2> pts) {
  std::sort(pts.begin(), pts.end(), [](const P2& a, const P2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const P2& a, const P2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<P2> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool point_in_hull(const std::vector<P2>& hull, double x, double y) {
  if (hull.size() < 3) return false;
  for (size_t i = 0; i < hull.size(); ++i) {
    const P2& a = hull[i];
    const P2& b = hull[(i + 1) % hull.size()];
    if (cross(a, b, {x, y}) < 0.0) return false;
  }
  return true;
}

std::array<Vec3, 8> box_corners(const Box3D& box) {
  const double c = std::cos(box.heading), s = std::sin(box.heading);
  std::array<Vec3, 8> out;
  int k = 0;
  for (int ix = -1; ix <= 1; ix += 2)
    for (int iy = -1; iy <= 1; iy += 2)
      for (int iz = -1; iz <= 1; iz += 2) {
        const double bx = ix * box.extents.x * 0.5;
        const double by = iy * box.extents.y * 0.5;
        const double bz = iz * box.extents.z * 0.5;
        out[static_cast<size_t>(k++)] = {box.center.x + c * bx - s * by,
                                         box.center.y + s * bx + c * by,
                                         box.center.z + bz};
      }
  return out;
}

}  // namespace

ClassMask boxes_to_mask(const PointCloud& cloud_lidar, const std::vector<Box3D>& boxes, const SensorRig& rig) {
  rig.validate();
  for (const Box3D& b : boxes) b.validate();

  const PointCloud cam = transform_to_camera(cloud_lidar, rig);
  const std::vector<Projection> proj = project_to_image(cam, rig);
  const int64_t w = rig.width, h = rig.height;

  ClassMask mask(w, h);
  std::vector<uint8_t> has_point(static_cast<size_t>(w * h), 0);

  std::vector<int64_t> pixel_of(cloud_lidar.size(), -1);
  for (size_t i = 0; i < proj.size(); ++i) {
    const Projection& pr = proj[i];
    if (pr.behind) continue;
    if (!(pr.u >= 0.0 && pr.u < static_cast<double>(w) && pr.v >= 0.0 && pr.v < static_cast<double>(h))) continue;
    const int64_t u = static_cast<int64_t>(pr.u);
    const int64_t v = static_cast<int64_t>(pr.v);
    pixel_of[i] = v * w + u;
    has_point[static_cast<size_t>(v * w + u)] = 1;
  }

  // Void: pixels inside a box's projected convex footprint that hold no
  // LiDAR point at all.
  for (const Box3D& box : boxes) {
    std::vector<P2> corners;
    for (const Vec3& corner : box_corners(box)) {
      const Vec3 cp = transform_point_to_camera(corner, rig);
      const Projection pr = project_point(cp, rig);
      if (pr.behind) continue;
      corners.push_back({pr.u, pr.v});
    }
    const std::vector<P2> hull = convex_hull(std::move(corners));
    if (hull.size() < 3) continue;
    double lox = hull[0].x, hix = hull[0].x, loy = hull[0].y, hiy = hull[0].y;
    for (const P2& p : hull) {
      lox = std::min(lox, p.x);
      hix = std::max(hix, p.x);
      loy = std::min(loy, p.y);
      hiy = std::max(hiy, p.y);
    }
    const int64_t u0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(lox)));
    const int64_t u1 = std::min<int64_t>(w - 1, static_cast<int64_t>(std::ceil(hix)));
    const int64_t v0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(loy)));
    const int64_t v1 = std::min<int64_t>(h - 1, static_cast<int64_t>(std::ceil(hiy)));
    for (int64_t v = v0; v <= v1; ++v)
      for (int64_t u = u0; u <= u1; ++u) {
        const size_t at = mask.idx(v, u);
        if (has_point[at]) continue;
        if (point_in_hull(hull, static_cast<double>(u) + 0.5, static_cast<double>(v) + 0.5))
          mask.codes[at] = kVoid;
      }
  }

  // In-box points claim their pixel with the box class; human wins collisions.
  for (size_t i = 0; i < cloud_lidar.size(); ++i) {
    if (pixel_of[i] < 0) continue;
    for (const Box3D& box : boxes) {
      if (!box.contains(cloud_lidar[i])) continue;
      const uint8_t code = box.cls == BoxClass::vehicle ? kVehicle : kHuman;
      uint8_t& cell = mask.codes[static_cast<size_t>(pixel_of[i])];
      if (cell == kBackground || cell == kVoid || (cell == kVehicle && code == kHuman)) cell = code;
    }
  }
  return mask;
}

// ------------------------------- file IO -----------------------------------

PointCloud read_point_cloud(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail("point cloud: cannot open " + path.string());
  PointCloud cloud;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Vec3 p;
    if (!(ss >> p.x >> p.y >> p.z))
      fail("point cloud: malformed line " + std::to_string(lineno) + " in " + path.string());
    if (!finite(p.x) || !finite(p.y) || !finite(p.z))
      fail("point cloud: non-finite coordinate at line " + std::to_string(lineno) + " in " + path.string());
    cloud.push_back(p);
  }
  return cloud;
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream os(path);
  if (!os) fail("point cloud: cannot open " + path.string());
  os.precision(17);
  for (const Vec3& p : cloud) os << p.x << " " << p.y << " " << p.z << "\n";
}

std::vector<Box3D> read_boxes(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail("boxes: cannot open " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    fail("boxes: invalid JSON in " + path.string() + ": " + e.what());
  }
  if (!j.is_array()) fail("boxes: expected a JSON array in " + path.string());
  std::vector<Box3D> boxes;
  for (const auto& item : j) {
    Box3D b;
    const auto& c = item.at("center");
    const auto& e = item.at("extents");
    b.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
    b.extents = {e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()};
    b.heading = item.at("heading").get<double>();
    b.cls = box_class_from_string(item.at("class").get<std::string>());
    b.validate();
    boxes.push_back(b);
  }
  return boxes;
}

void write_boxes(const std::filesystem::path& path, const std::vector<Box3D>& boxes) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const Box3D& b : boxes) {
    nlohmann::ordered_json item;
    item["center"] = {b.center.x, b.center.y, b.center.z};
    item["extents"] = {b.extents.x, b.extents.y, b.extents.z};
    item["heading"] = b.heading;
    item["class"] = b.cls == BoxClass::vehicle ? "vehicle" : "human";
    j.push_back(item);
  }
  std::ofstream os(path);
  if (!os) fail("boxes: cannot open " + path.string());
  os << j.dump(2) << "\n";
}

SensorRig read_rig(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail("rig: cannot open " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    fail("rig: invalid JSON in " + path.string() + ": " + e.what());
  }
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

void write_rig(const std::filesystem::path& path, const SensorRig& rig) {
  nlohmann::ordered_json j;
  j["euler"] = {rig.roll, rig.pitch, rig.yaw};
  j["camera_pos"] = {rig.camera_pos.x, rig.camera_pos.y, rig.camera_pos.z};
  j["focal"] = {rig.fx, rig.fy};
  j["resolution"] = {rig.width, rig.height};
  std::ofstream os(path);
  if (!os) fail("rig: cannot open " + path.string());
  os << j.dump(2) << "\n";
}

}  // namespace clft
