#pragma once

// Little-endian byte encoding shared by the feature, index and model files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spoc::io {

class ByteWriter {
 public:
  void put_bytes(std::string_view bytes) { buffer_.append(bytes); }
  void put_u32(std::uint32_t value);
  void put_u64(std::uint64_t value);
  void put_f32(float value) { put_u32(std::bit_cast<std::uint32_t>(value)); }
  void put_f64(double value) { put_u64(std::bit_cast<std::uint64_t>(value)); }

  const std::string& bytes() const { return buffer_; }

 private:
  std::string buffer_;
};

/// Cursor over an in-memory file image. Reads past the end throw
/// ErrorCode::MalformedHeader unless the caller checks remaining() first.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t count);
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  float get_f32() { return std::bit_cast<float>(get_u32()); }
  double get_f64() { return std::bit_cast<double>(get_u64()); }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames into place, so a failed write
/// never leaves a truncated file behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace spoc::io
