#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "clft/tensor.hpp"

namespace clft {

// Tensor binary format: magic "CLFT", u32 rank, u32 extents, then row-major
// 64-bit little-endian floats.
void write_tensor(std::ostream& os, const Tensor& t);
void write_tensor_file(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(std::istream& is, const std::string& what);
Tensor read_tensor_file(const std::filesystem::path& path);

}  // namespace clft
