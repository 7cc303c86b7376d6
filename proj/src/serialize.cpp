#include "clft/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace clft {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'F', 'T'};

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) fail("tensor read: truncated header in " + what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double v) {
  const uint64_t u = std::bit_cast<uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(const unsigned char* b) {
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic, 4);
  put_u32(os, static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) {
    const int64_t e = t.dim(i);
    if (e <= 0 || e > std::numeric_limits<uint32_t>::max()) fail("tensor write: extent out of range");
    put_u32(os, static_cast<uint32_t>(e));
  }
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * 8));
  } else {
    for (double v : t.data()) put_f64(os, v);
  }
  if (!os) fail("tensor write: stream failure");
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("tensor write: cannot open " + path.string());
  write_tensor(os, t);
}

Tensor read_tensor(std::istream& is, const std::string& what) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    fail("tensor read: bad magic in " + what);
  const uint32_t rank = get_u32(is, what);
  if (rank == 0 || rank > 8) fail("tensor read: unreasonable rank " + std::to_string(rank) + " in " + what);
  std::vector<int64_t> shape(rank);
  int64_t n = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    shape[i] = static_cast<int64_t>(get_u32(is, what));
    if (shape[i] <= 0) fail("tensor read: zero extent in " + what);
    n *= shape[i];
  }
  std::vector<double> data(static_cast<size_t>(n));
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * 8)))
      fail("tensor read: truncated data in " + what);
  } else {
    std::vector<unsigned char> buf(static_cast<size_t>(n) * 8);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 8)))
      fail("tensor read: truncated data in " + what);
    for (int64_t i = 0; i < n; ++i) data[static_cast<size_t>(i)] = get_f64(buf.data() + i * 8);
  }
  return Tensor::from_data(std::move(shape), std::move(data));
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("tensor read: cannot open " + path.string());
  return read_tensor(is, path.string());
}

}  // namespace clft
