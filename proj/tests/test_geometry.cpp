#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "clft/geometry.hpp"

using namespace clft;

namespace {

// Independent per-point reference for the whole projection pipeline. Written
// against the printed formulas, not the library code: explicit matrix
// entries, explicit predicate, explicit z-buffer map.
struct OraclePixel {
  double x, y, z;
  double depth;
};

std::map<std::pair<int64_t, int64_t>, OraclePixel> oracle_populate(const PointCloud& cloud,
                                                                   const SensorRig& rig) {
  const double cr = std::cos(rig.roll), sr = std::sin(rig.roll);
  const double cp = std::cos(rig.pitch), sp = std::sin(rig.pitch);
  const double cy = std::cos(rig.yaw), sy = std::sin(rig.yaw);
  std::map<std::pair<int64_t, int64_t>, OraclePixel> grid;
  for (const Vec3& p : cloud) {
    const double dx = p.x - rig.camera_pos.x;
    const double dy = p.y - rig.camera_pos.y;
    const double dz = p.z - rig.camera_pos.z;
    // yaw, then pitch, then roll, each matrix exactly as printed
    const double yx = cy * dx + sy * dy;
    const double yy = -sy * dx + cy * dy;
    const double yz = dz;
    const double px = cp * yx - sp * yz;
    const double py = yy;
    const double pz = sp * yx + cp * yz;
    const double rx = px;
    const double ry = cr * py + sr * pz;
    const double rz = -sr * py + cr * pz;
    if (rz <= 1e-6) continue;
    const double u = rig.fx * (rx / rz) + static_cast<double>(rig.width) / 2.0;
    const double v = rig.fy * (ry / rz) + static_cast<double>(rig.height) / 2.0;
    if (!(u >= 0.0 && u < static_cast<double>(rig.width) && v >= 0.0 && v < static_cast<double>(rig.height)))
      continue;
    const auto key = std::make_pair(static_cast<int64_t>(std::floor(v)), static_cast<int64_t>(std::floor(u)));
    auto it = grid.find(key);
    if (it == grid.end() || rz < it->second.depth) grid[key] = {rx, ry, rz, rz};
  }
  return grid;
}

bool planes_match_oracle(const PlaneStack& planes, const PointCloud& cloud, const SensorRig& rig) {
  const auto oracle = oracle_populate(cloud, rig);
  for (int64_t v = 0; v < rig.height; ++v)
    for (int64_t u = 0; u < rig.width; ++u) {
      const size_t at = planes.idx(v, u);
      const auto it = oracle.find({v, u});
      if (it == oracle.end()) {
        if (planes.occupancy[at]) return false;
        if (planes.xy[at] != 0.0 || planes.yz[at] != 0.0 || planes.xz[at] != 0.0) return false;
      } else {
        if (!planes.occupancy[at]) return false;
        if (planes.xy[at] != it->second.x) return false;
        if (planes.yz[at] != it->second.y) return false;
        if (planes.xz[at] != it->second.z) return false;
      }
    }
  return true;
}

SensorRig random_rig(Rng& rng) {
  SensorRig rig;
  rig.roll = rng.uniform(-M_PI, M_PI);
  rig.pitch = rng.uniform(-M_PI, M_PI);
  rig.yaw = rng.uniform(-M_PI, M_PI);
  rig.camera_pos = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
  rig.fx = rng.uniform(10.0, 120.0);
  rig.fy = rng.uniform(10.0, 120.0);
  rig.width = 8 + rng.uniform_int(56);
  rig.height = 8 + rng.uniform_int(40);
  return rig;
}

}  // namespace

TEST_CASE("transform_to_camera: identity rig") {
  SensorRig rig;
  rig.fx = rig.fy = 10;
  rig.width = rig.height = 8;
  const PointCloud cloud{{1, 2, 3}, {-4, 0, 2}};
  const PointCloud out = transform_to_camera(cloud, rig);
  for (size_t i = 0; i < cloud.size(); ++i) {
    CHECK(out[i].x == cloud[i].x);
    CHECK(out[i].y == cloud[i].y);
    CHECK(out[i].z == cloud[i].z);
  }
}

TEST_CASE("transform_to_camera: translation cancels") {
  SensorRig rig;
  rig.fx = rig.fy = 10;
  rig.width = rig.height = 8;
  rig.camera_pos = {1, 2, 3};
  const PointCloud out = transform_to_camera({{1, 2, 3}}, rig);
  CHECK(out[0].x == 0.0);
  CHECK(out[0].y == 0.0);
  CHECK(out[0].z == 0.0);
}

TEST_CASE("transform_to_camera: yaw pi/2 sends (1,0,0) to (0,-1,0)") {
  SensorRig rig;
  rig.fx = rig.fy = 10;
  rig.width = rig.height = 8;
  rig.yaw = M_PI / 2.0;
  const PointCloud out = transform_to_camera({{1, 0, 0}}, rig);
  CHECK(out[0].x == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(out[0].y == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(std::abs(out[0].z) < 1e-15);
}

TEST_CASE("transform_to_camera preserves pairwise distances") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    SensorRig rig = random_rig(rng);
    PointCloud cloud;
    for (int i = 0; i < 12; ++i)
      cloud.push_back({rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20)});
    const PointCloud out = transform_to_camera(cloud, rig);
    for (size_t i = 0; i < cloud.size(); ++i)
      for (size_t j = i + 1; j < cloud.size(); ++j) {
        const double before = std::hypot(cloud[i].x - cloud[j].x, cloud[i].y - cloud[j].y,
                                         cloud[i].z - cloud[j].z);
        const double after = std::hypot(out[i].x - out[j].x, out[i].y - out[j].y, out[i].z - out[j].z);
        CHECK(std::abs(before - after) < 1e-9);
      }
  }
}

TEST_CASE("project_to_image: optical axis lands on the principal point") {
  SensorRig rig;
  rig.fx = 100;
  rig.fy = 100;
  rig.width = 384;
  rig.height = 384;
  const auto proj = project_to_image({{0, 0, 5}}, rig);
  CHECK_FALSE(proj[0].behind);
  CHECK(proj[0].u == doctest::Approx(192.0));
  CHECK(proj[0].v == doctest::Approx(192.0));
  CHECK(proj[0].depth == 5.0);
}

TEST_CASE("project_to_image: closed-form pinhole evaluation") {
  SensorRig rig;
  rig.fx = 100;
  rig.fy = 50;
  rig.width = 384;
  rig.height = 200;
  const auto proj = project_to_image({{1, 0, 2}}, rig);
  CHECK(proj[0].u == doctest::Approx(242.0).epsilon(1e-12));
}

TEST_CASE("project_to_image: behind-camera points are flagged, not thrown") {
  SensorRig rig;
  rig.fx = rig.fy = 10;
  rig.width = rig.height = 8;
  const auto proj = project_to_image({{0, 0, -1}, {0, 0, 0}}, rig);
  CHECK(proj[0].behind);
  CHECK(proj[1].behind);  // z = 0 is inside the epsilon guard
}

TEST_CASE("filter_and_populate: empty cloud gives all-zero grids") {
  SensorRig rig;
  rig.fx = rig.fy = 10;
  rig.width = 6;
  rig.height = 4;
  const PlaneStack planes = filter_and_populate({}, rig);
  CHECK_FALSE(planes.any_occupied());
  for (double v : planes.xy) CHECK(v == 0.0);
}

TEST_CASE("filter_and_populate: one in-view point occupies exactly one pixel") {
  SensorRig rig;
  rig.fx = rig.fy = 10;
  rig.width = 8;
  rig.height = 8;
  const PlaneStack planes = filter_and_populate({{0.1, -0.2, 2.0}}, rig);
  int64_t occupied = 0;
  for (int64_t i = 0; i < 64; ++i)
    if (planes.occupancy[static_cast<size_t>(i)]) {
      ++occupied;
      CHECK(planes.xy[static_cast<size_t>(i)] == 0.1);
      CHECK(planes.yz[static_cast<size_t>(i)] == -0.2);
      CHECK(planes.xz[static_cast<size_t>(i)] == 2.0);
    }
  CHECK(occupied == 1);
}

TEST_CASE("filter_and_populate: 1000 random points equal the brute-force oracle") {
  Rng rng(32);
  SensorRig rig = random_rig(rng);
  PointCloud cloud;
  for (int i = 0; i < 1000; ++i)
    cloud.push_back({rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)});
  const PlaneStack planes = filter_and_populate(cloud, rig);
  CHECK(planes_match_oracle(planes, cloud, rig));
}

TEST_CASE("filter_and_populate: fuzzed rigs and clouds match the oracle and stay in bounds") {
  Rng rng(33);
  for (int trial = 0; trial < 60; ++trial) {
    SensorRig rig = random_rig(rng);
    PointCloud cloud;
    const int64_t n = rng.uniform_int(300);
    for (int64_t i = 0; i < n; ++i) {
      const double scale = rng.uniform() < 0.5 ? 3.0 : 50.0;
      cloud.push_back({rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale)});
    }
    const PlaneStack planes = filter_and_populate(cloud, rig);  // would crash/assert on OOB writes
    CHECK(planes_match_oracle(planes, cloud, rig));
  }
}

TEST_CASE("filter_and_populate: z-buffer keeps the nearer point, earlier on ties") {
  SensorRig rig;
  rig.fx = rig.fy = 10;
  rig.width = rig.height = 8;
  // same ray, different depths
  PlaneStack planes = filter_and_populate({{0, 0, 4.0}, {0, 0, 2.0}}, rig);
  const size_t at = planes.idx(4, 4);
  CHECK(planes.xz[at] == 2.0);
  // exact tie on the same pixel: first point wins
  planes = filter_and_populate({{0.05, 0, 2.0}, {0.02, 0, 2.0}}, rig);
  CHECK(planes.xy[planes.idx(4, 4)] == 0.05);
}

TEST_CASE("densify: radius 0 is the identity") {
  Rng rng(34);
  SensorRig rig = random_rig(rng);
  PointCloud cloud;
  for (int i = 0; i < 50; ++i) cloud.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(1, 20)});
  const PlaneStack planes = filter_and_populate(cloud, rig);
  const PlaneStack out = densify(planes, 0);
  CHECK(out.xy == planes.xy);
  CHECK(out.yz == planes.yz);
  CHECK(out.xz == planes.xz);
  CHECK(out.occupancy == planes.occupancy);
}

TEST_CASE("densify: single pixel with radius 1 becomes a 3x3 block of itself") {
  PlaneStack planes(7, 7);
  const size_t at = planes.idx(3, 3);
  planes.occupancy[at] = 1;
  planes.xy[at] = 1.5;
  planes.yz[at] = -2.5;
  planes.xz[at] = 9.0;
  const PlaneStack out = densify(planes, 1);
  for (int64_t v = 0; v < 7; ++v)
    for (int64_t u = 0; u < 7; ++u) {
      const bool inside = std::abs(v - 3) <= 1 && std::abs(u - 3) <= 1;
      CHECK(static_cast<bool>(out.occupancy[out.idx(v, u)]) == inside);
      if (inside) {
        CHECK(out.xy[out.idx(v, u)] == 1.5);
        CHECK(out.yz[out.idx(v, u)] == -2.5);
        CHECK(out.xz[out.idx(v, u)] == 9.0);
      }
    }
}

TEST_CASE("densify: two pixels 4 apart with radius 1 give disjoint blocks (brute-force check)") {
  PlaneStack planes(9, 5);
  auto seed = [&planes](int64_t v, int64_t u, double depth) {
    const size_t at = planes.idx(v, u);
    planes.occupancy[at] = 1;
    planes.xy[at] = depth * 10;
    planes.yz[at] = depth * 100;
    planes.xz[at] = depth;
  };
  seed(2, 2, 5.0);
  seed(2, 6, 7.0);
  const PlaneStack out = densify(planes, 1);
  // brute-force dilation oracle
  for (int64_t v = 0; v < 5; ++v)
    for (int64_t u = 0; u < 9; ++u) {
      double best_depth = 0.0;
      bool found = false;
      for (const auto& [sv, su, depth] : {std::tuple{2, 2, 5.0}, std::tuple{2, 6, 7.0}}) {
        const int64_t d = std::max(std::abs(v - sv), std::abs(u - su));
        if (d <= 1 && (!found || depth < best_depth)) {
          found = true;
          best_depth = depth;
        }
      }
      CHECK(static_cast<bool>(out.occupancy[out.idx(v, u)]) == found);
      if (found) CHECK(out.xz[out.idx(v, u)] == best_depth);
    }
}

TEST_CASE("densify: ties at equal distance prefer the smaller depth") {
  PlaneStack planes(5, 5);
  auto seed = [&planes](int64_t v, int64_t u, double depth) {
    const size_t at = planes.idx(v, u);
    planes.occupancy[at] = 1;
    planes.xz[at] = depth;
  };
  seed(2, 0, 9.0);
  seed(2, 2, 3.0);  // pixel (2,1) is distance 1 from both; depth 3 must win
  const PlaneStack out = densify(planes, 1);
  CHECK(out.xz[out.idx(2, 1)] == 3.0);
}

TEST_CASE("densify: idempotent once the grid is fully covered") {
  Rng rng(35);
  PlaneStack planes(16, 12);
  for (int i = 0; i < 60; ++i) {
    const int64_t v = rng.uniform_int(12), u = rng.uniform_int(16);
    const size_t at = planes.idx(v, u);
    planes.occupancy[at] = 1;
    planes.xz[at] = rng.uniform(1.0, 9.0);
  }
  const PlaneStack once = densify(planes, 4);
  bool full = true;
  for (uint8_t o : once.occupancy) full = full && o;
  REQUIRE(full);  // gaps of <= radius were covered
  const PlaneStack twice = densify(once, 4);
  CHECK(twice.xy == once.xy);
  CHECK(twice.yz == once.yz);
  CHECK(twice.xz == once.xz);
}

TEST_CASE("boxes_to_mask: no boxes means all background") {
  Rng rng(36);
  SensorRig rig = random_rig(rng);
  PointCloud cloud;
  for (int i = 0; i < 100; ++i) cloud.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(1, 10)});
  const ClassMask mask = boxes_to_mask(cloud, {}, rig);
  for (uint8_t c : mask.codes) CHECK(c == kBackground);
}

TEST_CASE("boxes_to_mask: five in-view points on distinct pixels give five class pixels plus void") {
  SensorRig rig;
  rig.fx = rig.fy = 40;
  rig.width = rig.height = 64;
  Box3D box;
  box.center = {0, 0, 5};
  box.extents = {2.0, 2.0, 2.0};
  box.cls = BoxClass::vehicle;
  // five spread points inside the box, distinct pixels
  const PointCloud cloud{{-0.8, -0.8, 5}, {0.8, -0.8, 5}, {0, 0, 5}, {-0.8, 0.8, 5}, {0.8, 0.8, 5}};
  const ClassMask mask = boxes_to_mask(cloud, {box}, rig);
  int64_t vehicle = 0, void_px = 0;
  for (uint8_t c : mask.codes) {
    if (c == kVehicle) ++vehicle;
    if (c == kVoid) ++void_px;
  }
  CHECK(vehicle == 5);
  CHECK(void_px > 0);  // footprint pixels without points
}

TEST_CASE("boxes_to_mask: class pixels match a point-in-box brute-force oracle; codes closed") {
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    SensorRig rig;
    rig.fx = rig.fy = rng.uniform(20, 60);
    rig.width = 48;
    rig.height = 40;
    std::vector<Box3D> boxes;
    for (int b = 0; b < 3; ++b) {
      Box3D box;
      box.center = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(4, 9)};
      box.extents = {rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5)};
      box.heading = rng.uniform(-M_PI, M_PI);
      box.cls = b % 2 == 0 ? BoxClass::vehicle : BoxClass::human;
      boxes.push_back(box);
    }
    PointCloud cloud;
    for (int i = 0; i < 600; ++i)
      cloud.push_back({rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-2, 11)});

    const ClassMask mask = boxes_to_mask(cloud, boxes, rig);
    for (uint8_t c : mask.codes) CHECK((c == 0 || c == 1 || c == 2 || c == 255));

    // oracle over all point-box pairs, independent transform/projection
    std::map<std::pair<int64_t, int64_t>, uint8_t> expected;
    for (const Vec3& p : cloud) {
      uint8_t code = kBackground;
      for (const Box3D& box : boxes) {
        const double dx = p.x - box.center.x, dy = p.y - box.center.y, dz = p.z - box.center.z;
        const double ch = std::cos(box.heading), sh = std::sin(box.heading);
        const double bx = ch * dx + sh * dy;
        const double by = -sh * dx + ch * dy;
        if (std::abs(bx) <= box.extents.x / 2 && std::abs(by) <= box.extents.y / 2 &&
            std::abs(dz) <= box.extents.z / 2) {
          const uint8_t bc = box.cls == BoxClass::vehicle ? kVehicle : kHuman;
          if (code == kBackground || bc == kHuman) code = bc;
        }
      }
      if (code == kBackground) continue;
      if (p.z <= 1e-6) continue;
      const double u = rig.fx * (p.x / p.z) + rig.width / 2.0;
      const double v = rig.fy * (p.y / p.z) + rig.height / 2.0;
      if (!(u >= 0 && u < rig.width && v >= 0 && v < rig.height)) continue;
      const auto key = std::make_pair(static_cast<int64_t>(std::floor(v)), static_cast<int64_t>(std::floor(u)));
      auto it = expected.find(key);
      if (it == expected.end() || code == kHuman) expected[key] = code;
    }
    for (int64_t v = 0; v < rig.height; ++v)
      for (int64_t u = 0; u < rig.width; ++u) {
        const uint8_t got = mask.codes[mask.idx(v, u)];
        const auto it = expected.find({v, u});
        if (it != expected.end()) {
          CHECK(got == it->second);
        } else {
          CHECK((got == kBackground || got == kVoid));
        }
      }
  }
}

TEST_CASE("boxes_to_mask: human wins pixel collisions and cyclists merge into human") {
  CHECK(box_class_from_string("cyclist") == BoxClass::human);
  CHECK(box_class_from_string("pedestrian") == BoxClass::human);
  CHECK_THROWS_AS(box_class_from_string("traffic_sign"), Error);

  SensorRig rig;
  rig.fx = rig.fy = 40;
  rig.width = rig.height = 32;
  Box3D vehicle;
  vehicle.center = {0, 0, 5};
  vehicle.extents = {2, 2, 2};
  vehicle.cls = BoxClass::vehicle;
  Box3D human = vehicle;
  human.cls = BoxClass::human;
  const PointCloud cloud{{0, 0, 5}};
  const ClassMask mask = boxes_to_mask(cloud, {vehicle, human}, rig);
  CHECK(mask.codes[mask.idx(16, 16)] == kHuman);
  // order-independent
  const ClassMask mask2 = boxes_to_mask(cloud, {human, vehicle}, rig);
  CHECK(mask2.codes[mask2.idx(16, 16)] == kHuman);
}
