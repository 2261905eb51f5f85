#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"

#include "spoc/error.hpp"
#include "spoc/feature_store.hpp"

#define CHECK_ERROR(expr, expected_code)                               \
  do {                                                                 \
    bool thrown_ = false;                                              \
    try {                                                              \
      (void)(expr);                                                    \
    } catch (const spoc::Error& e) {                                   \
      thrown_ = true;                                                  \
      CHECK_MESSAGE(e.code() == (expected_code), e.what());            \
    }                                                                  \
    CHECK_MESSAGE(thrown_, "expected spoc::Error from " #expr);        \
  } while (0)

namespace testing {

/// Map with explicit per-cell vectors, cells listed row-major.
inline spoc::FeatureMap map_from_cells(const std::vector<std::vector<float>>& cells,
                                       std::uint32_t height, std::uint32_t width,
                                       std::string id = "m") {
  const auto channels = static_cast<std::uint32_t>(cells.front().size());
  std::vector<float> data(std::size_t{channels} * height * width);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::uint32_t c = 0; c < channels; ++c) data[c * cells.size() + i] = cells[i][c];
  }
  return spoc::FeatureMap(std::move(id), channels, height, width, std::move(data),
                          spoc::stride16_geometry(height, width));
}

/// Fresh scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("spoc_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
