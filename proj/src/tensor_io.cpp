#include "posture/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

namespace posture {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'S', 'D'};

template <typename T>
void write_le(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw FormatError("tensor file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

std::size_t FloatTensor::size() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }

void write_tensor(std::ostream& out, const FloatTensor& tensor) {
  if (tensor.size() != tensor.data.size()) throw FormatError("tensor dims do not match data size");
  out.write(kMagic, 4);
  write_u32(out, kTensorVersion);
  write_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) write_u64(out, d);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
  } else {
    for (float v : tensor.data) write_le(out, v);
  }
  if (!out) throw FormatError("failed writing tensor");
}

FloatTensor read_tensor(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a PCSD tensor");
  const auto version = read_u32(in);
  if (version != kTensorVersion) throw FormatError("unsupported tensor version " + std::to_string(version));
  FloatTensor t;
  t.dims.resize(read_u32(in));
  for (auto& d : t.dims) d = read_u64(in);
  t.data.resize(t.size());
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float))))
      throw FormatError("tensor file truncated");
  } else {
    for (auto& v : t.data) v = read_le<float>(in);
  }
  return t;
}

void save_tensor(const std::filesystem::path& path, const FloatTensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_tensor(out, tensor);
}

FloatTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_tensor(in);
}

}  // namespace posture
