#include "clft/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace clft {

void write_pgm(const std::filesystem::path& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& gray) {
  if (static_cast<int64_t>(gray.size()) != width * height) fail("write_pgm: buffer size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("write_pgm: cannot open " + path.string());
  os << "P5\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
}

void write_ppm(const std::filesystem::path& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& rgb) {
  if (static_cast<int64_t>(rgb.size()) != width * height * 3) fail("write_ppm: buffer size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("write_ppm: cannot open " + path.string());
  os << "P6\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

std::vector<uint8_t> plane_preview(const std::vector<double>& grid, const std::vector<uint8_t>& occupancy) {
  if (grid.size() != occupancy.size()) fail("plane_preview: grid/occupancy size mismatch");
  double lo = 0.0, hi = 0.0;
  bool seen = false;
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!occupancy[i]) continue;
    if (!seen) {
      lo = hi = grid[i];
      seen = true;
    } else {
      lo = std::min(lo, grid[i]);
      hi = std::max(hi, grid[i]);
    }
  }
  std::vector<uint8_t> out(grid.size(), 0);
  if (!seen) return out;
  const double span = hi > lo ? hi - lo : 1.0;
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!occupancy[i]) continue;
    const double t = (grid[i] - lo) / span;
    // Keep occupied pixels visible even at the low end of the range.
    out[i] = static_cast<uint8_t>(std::lround(32.0 + t * 223.0));
  }
  return out;
}

Palette palette_color(uint8_t code) {
  switch (code) {
    case kBackground: return {0, 0, 0};
    case kVehicle: return {220, 40, 40};
    case kHuman: return {40, 80, 220};
  }
  fail("palette_color: no palette entry for code " + std::to_string(code));
}

std::vector<uint8_t> overlay_rgb(const Tensor& rgb, const ClassMask& pred) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) fail("overlay_rgb: 3 x h x w image required");
  const int64_t h = rgb.dim(1), w = rgb.dim(2);
  if (pred.height != h || pred.width != w) fail("overlay_rgb: mask extents mismatch");
  std::vector<uint8_t> out(static_cast<size_t>(h * w * 3));
  const double* chans = rgb.data().data();
  const int64_t hw = h * w;
  for (int64_t p = 0; p < hw; ++p) {
    const uint8_t code = pred.codes[static_cast<size_t>(p)];
    double r = std::clamp(chans[p], 0.0, 1.0) * 255.0;
    double g = std::clamp(chans[hw + p], 0.0, 1.0) * 255.0;
    double b = std::clamp(chans[2 * hw + p], 0.0, 1.0) * 255.0;
    if (code != kBackground) {
      const Palette c = palette_color(code);
      r = 0.45 * r + 0.55 * c.r;
      g = 0.45 * g + 0.55 * c.g;
      b = 0.45 * b + 0.55 * c.b;
    }
    out[static_cast<size_t>(3 * p)] = static_cast<uint8_t>(std::lround(r));
    out[static_cast<size_t>(3 * p + 1)] = static_cast<uint8_t>(std::lround(g));
    out[static_cast<size_t>(3 * p + 2)] = static_cast<uint8_t>(std::lround(b));
  }
  return out;
}

std::vector<uint8_t> mask_preview(const ClassMask& mask) {
  std::vector<uint8_t> out(mask.codes.size() * 3);
  for (size_t i = 0; i < mask.codes.size(); ++i) {
    uint8_t r = 128, g = 128, b = 128;  // void
    if (mask.codes[i] != kVoid) {
      const Palette c = palette_color(mask.codes[i]);
      r = c.r;
      g = c.g;
      b = c.b;
    }
    out[3 * i] = r;
    out[3 * i + 1] = g;
    out[3 * i + 2] = b;
  }
  return out;
}

}  // namespace clft
