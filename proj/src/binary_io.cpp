#include "spoc/binary_io.hpp"

#include <fstream>
#include <sstream>

#include "spoc/error.hpp"

namespace spoc::io {

void ByteWriter::put_u32(std::uint32_t value) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  buffer_.append(b, 4);
}

void ByteWriter::put_u64(std::uint64_t value) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  buffer_.append(b, 8);
}

std::string_view ByteReader::take(std::size_t count) {
  if (count > remaining()) {
    fail(ErrorCode::MalformedHeader, "unexpected end of file");
  }
  auto out = bytes_.substr(pos_, count);
  pos_ += count;
  return out;
}

std::uint32_t ByteReader::get_u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
  return v;
}

std::uint64_t ByteReader::get_u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorCode::IoFailure, "read failed: " + path.string());
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      fail(ErrorCode::IoFailure, "write failed: " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::IoFailure, "cannot move into place: " + path.string());
  }
}

}  // namespace spoc::io
