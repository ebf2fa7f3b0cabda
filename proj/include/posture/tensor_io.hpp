#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace posture {

/// Dense row-major float tensor as persisted on disk.
struct FloatTensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  std::size_t size() const;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary layout: magic "PCSD", u32 version, u32 rank, u64 dims[rank],
/// then little-endian f32 values.
inline constexpr std::uint32_t kTensorVersion = 1;

void write_tensor(std::ostream& out, const FloatTensor& tensor);
FloatTensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const FloatTensor& tensor);
FloatTensor load_tensor(const std::filesystem::path& path);

// Little-endian primitives shared with the checkpoint format.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);

}  // namespace posture
