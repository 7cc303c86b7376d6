#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "clft/geometry.hpp"
#include "clft/tensor.hpp"

namespace clft {

void write_pgm(const std::filesystem::path& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& gray);
void write_ppm(const std::filesystem::path& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& rgb);

/// 8-bit preview of one projection grid, intensities proportionally scaled
/// over the occupied value range; empty pixels are black.
std::vector<uint8_t> plane_preview(const std::vector<double>& grid, const std::vector<uint8_t>& occupancy);

struct Palette {
  uint8_t r, g, b;
};
/// Overlay palette for prediction codes 0..2 (background keeps the photo).
Palette palette_color(uint8_t code);

/// Argmax classes tinted onto the RGB image; background pixels pass through.
std::vector<uint8_t> overlay_rgb(const Tensor& rgb, const ClassMask& pred);

/// Color rendering of a ground-truth/prediction mask (void is gray).
std::vector<uint8_t> mask_preview(const ClassMask& mask);

}  // namespace clft
