#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "clft/dataset.hpp"
#include "clft/synthetic.hpp"

using namespace clft;
namespace fs = std::filesystem;

TEST_CASE("generate_synthetic: mask is self-consistent with cloud + boxes via the geometry module") {
  const Dataset data = generate_synthetic(1, 31, Separability::joint);
  const Frame& f = data.frames[0];
  const ClassMask rebuilt = boxes_to_mask(f.cloud, f.boxes, data.rig);
  CHECK(rebuilt.codes == f.mask.codes);
  const PlaneStack rebuilt_planes = filter_and_populate(f.cloud, data.rig);
  CHECK(rebuilt_planes.xy == f.planes_raw.xy);
  CHECK(rebuilt_planes.occupancy == f.planes_raw.occupancy);
}

TEST_CASE("generate_synthetic: same seed gives an identical dataset") {
  const Dataset a = generate_synthetic(4, 32, Separability::color);
  const Dataset b = generate_synthetic(4, 32, Separability::color);
  REQUIRE(a.frames.size() == b.frames.size());
  for (size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].rgb.data() == b.frames[i].rgb.data());
    CHECK(a.frames[i].mask.codes == b.frames[i].mask.codes);
    REQUIRE(a.frames[i].cloud.size() == b.frames[i].cloud.size());
    CHECK(a.frames[i].boxes.size() == b.frames[i].boxes.size());
  }
}

TEST_CASE("generate_synthetic: frames contain both classes and void pixels across the set") {
  const Dataset data = generate_synthetic(12, 33, Separability::joint);
  int64_t vehicle = 0, human = 0, voids = 0;
  for (const Frame& f : data.frames)
    for (uint8_t c : f.mask.codes) {
      vehicle += c == kVehicle;
      human += c == kHuman;
      voids += c == kVoid;
    }
  CHECK(vehicle > 0);
  CHECK(human > 0);
  CHECK(voids > 0);
}

TEST_CASE("joint mode: an RGB-mean-per-object classifier cannot exceed 60% accuracy") {
  const Dataset data = generate_synthetic(48, 34, Separability::joint);
  // Collect per-object mean red-minus-blue and the true class.
  std::vector<std::pair<double, bool>> objects;  // (redness, is_vehicle)
  for (const Frame& f : data.frames) {
    const int64_t h = f.rgb.dim(1), w = f.rgb.dim(2);
    for (const Box3D& box : f.boxes) {
      // project the box center to find its painted region
      const Vec3 cam = transform_point_to_camera(box.center, data.rig);
      const Projection pr = project_point(cam, data.rig);
      if (pr.behind) continue;
      const int64_t u = static_cast<int64_t>(pr.u), v = static_cast<int64_t>(pr.v);
      if (u < 1 || u >= w - 1 || v < 1 || v >= h - 1) continue;
      double red = 0.0, blue = 0.0;
      int64_t count = 0;
      for (int64_t dv = -1; dv <= 1; ++dv)
        for (int64_t du = -1; du <= 1; ++du) {
          red += f.rgb.data()[static_cast<size_t>((v + dv) * w + (u + du))];
          blue += f.rgb.data()[static_cast<size_t>((2 * h + v + dv) * w + (u + du))];
          ++count;
        }
      objects.emplace_back((red - blue) / count, box.cls == BoxClass::vehicle);
    }
  }
  REQUIRE(objects.size() > 40);
  // best threshold classifier on redness, both polarities (brute force)
  int64_t best = 0;
  for (const auto& [threshold, _] : objects) {
    int64_t correct_pos = 0, correct_neg = 0;
    for (const auto& [r, vehicle] : objects) {
      if ((r >= threshold) == vehicle) ++correct_pos;
      if ((r < threshold) == vehicle) ++correct_neg;
    }
    best = std::max({best, correct_pos, correct_neg});
  }
  const double accuracy = static_cast<double>(best) / static_cast<double>(objects.size());
  CHECK(accuracy <= 0.60);
}

TEST_CASE("color mode: color alone decides the class") {
  const Dataset data = generate_synthetic(16, 35, Separability::color);
  for (const Frame& f : data.frames) {
    const int64_t h = f.rgb.dim(1), w = f.rgb.dim(2);
    for (const Box3D& box : f.boxes) {
      const Vec3 cam = transform_point_to_camera(box.center, data.rig);
      const Projection pr = project_point(cam, data.rig);
      if (pr.behind) continue;
      const int64_t u = static_cast<int64_t>(pr.u), v = static_cast<int64_t>(pr.v);
      if (u < 0 || u >= w || v < 0 || v >= h) continue;
      const double red = f.rgb.data()[static_cast<size_t>(v * w + u)];
      const double blue = f.rgb.data()[static_cast<size_t>((2 * h + v) * w + u)];
      CHECK((red > blue) == (box.cls == BoxClass::vehicle));
    }
  }
}

TEST_CASE("dataset round trip through the directory layout") {
  const Dataset data = generate_synthetic(3, 36, Separability::depth, 64, 64);
  const fs::path dir = fs::temp_directory_path() / "clft_dataset_test";
  fs::remove_all(dir);
  write_dataset(dir, data);
  CHECK(fs::exists(dir / "dataset.json"));
  CHECK(fs::exists(dir / "frame_000000.rgb"));
  CHECK(fs::exists(dir / "frame_000002.mask"));

  const Dataset back = load_dataset(dir);
  REQUIRE(back.frames.size() == 3);
  CHECK(back.rig.width == 64);
  CHECK(back.separability == "depth");
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back.frames[i].rgb.data() == data.frames[i].rgb.data());
    CHECK(back.frames[i].mask.codes == data.frames[i].mask.codes);
    CHECK(back.frames[i].planes_raw.xz == data.frames[i].planes_raw.xz);
    CHECK(back.frames[i].tag == data.frames[i].tag);
    REQUIRE(back.frames[i].cloud.size() == data.frames[i].cloud.size());
    CHECK(back.frames[i].cloud[0].x == data.frames[i].cloud[0].x);
  }

  // adapter path: drop the caches, loader re-derives through geometry
  fs::remove(dir / "frame_000001.planes");
  fs::remove(dir / "frame_000001.occ");
  fs::remove(dir / "frame_000001.mask");
  const Dataset derived = load_dataset(dir);
  CHECK(derived.frames[1].mask.codes == data.frames[1].mask.codes);
  CHECK(derived.frames[1].planes_raw.xz == data.frames[1].planes_raw.xz);
  fs::remove_all(dir);
}

TEST_CASE("subset tags cycle deterministically over frames") {
  const Dataset data = generate_synthetic(8, 37, Separability::color);
  CHECK(data.frames[0].tag == SubsetTag::light_dry);
  CHECK(data.frames[1].tag == SubsetTag::light_wet);
  CHECK(data.frames[2].tag == SubsetTag::dark_dry);
  CHECK(data.frames[3].tag == SubsetTag::dark_wet);
  CHECK(data.frames[4].tag == SubsetTag::light_dry);
}
