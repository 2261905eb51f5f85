#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace spoc {

/// Maps feature-map cells back to input-image pixels.
struct ReceptiveFieldGeometry {
  std::uint32_t stride = 16;
  std::int32_t offset = 8;  ///< pixel coordinate of the center of cell (1,1)
  std::uint32_t input_height = 1;
  std::uint32_t input_width = 1;

  bool operator==(const ReceptiveFieldGeometry&) const = default;
};

/// Geometry of the reference network: stride 16, offset 8, 586x586 input
/// producing 37x37 cells.
ReceptiveFieldGeometry reference_geometry();

/// Geometry with stride 16 / offset 8 whose input size is exactly
/// 16*height by 16*width. Handy for synthetic maps.
ReceptiveFieldGeometry stride16_geometry(std::uint32_t height, std::uint32_t width);

/// One local feature with 1-based cell coordinates.
struct LocalFeature {
  std::vector<float> vector;
  std::uint32_t x = 1;
  std::uint32_t y = 1;
};

/// C x H x W activations of one image. Layout is channel-outermost,
/// then row, then column. Immutable once constructed.
class FeatureMap {
 public:
  /// Validates shape, finiteness and geometry; throws spoc::Error.
  FeatureMap(std::string image_id, std::uint32_t channels, std::uint32_t height,
             std::uint32_t width, std::vector<float> data, ReceptiveFieldGeometry geometry);

  const std::string& image_id() const { return image_id_; }
  std::uint32_t channels() const { return channels_; }
  std::uint32_t height() const { return height_; }
  std::uint32_t width() const { return width_; }
  std::size_t cells() const { return std::size_t{height_} * width_; }
  const ReceptiveFieldGeometry& geometry() const { return geometry_; }
  std::span<const float> data() const { return data_; }

  /// Plane of channel c (H*W values, row-major).
  std::span<const float> channel(std::uint32_t c) const {
    return std::span<const float>(data_).subspan(std::size_t{c} * cells(), cells());
  }

  /// 0-based accessor.
  float at(std::uint32_t c, std::uint32_t row, std::uint32_t col) const {
    return data_[(std::size_t{c} * height_ + row) * width_ + col];
  }

  /// Feature vector at 1-based (x, y); throws OutOfBounds.
  LocalFeature local_feature(std::uint32_t x, std::uint32_t y) const;

  /// Same map with every activation multiplied by `factor`.
  FeatureMap scaled(float factor) const;

  bool operator==(const FeatureMap&) const = default;

 private:
  std::string image_id_;
  std::uint32_t channels_;
  std::uint32_t height_;
  std::uint32_t width_;
  std::vector<float> data_;
  ReceptiveFieldGeometry geometry_;
};

struct PixelCenter {
  std::int64_t px;
  std::int64_t py;
  bool operator==(const PixelCenter&) const = default;
};

/// Input-pixel center of 1-based cell (x, y), clamped to the image.
PixelCenter receptive_field_center(const ReceptiveFieldGeometry& geometry, std::uint32_t height,
                                   std::uint32_t width, std::uint32_t x, std::uint32_t y);
PixelCenter receptive_field_center(const FeatureMap& map, std::uint32_t x, std::uint32_t y);

std::string encode_feature_file(const FeatureMap& map);
FeatureMap decode_feature_file(std::string_view bytes);

FeatureMap read_feature_file(const std::filesystem::path& path);
void write_feature_file(const FeatureMap& map, const std::filesystem::path& path);

struct ManifestEntry {
  std::string image_id;
  std::filesystem::path path;
  bool operator==(const ManifestEntry&) const = default;
};

/// Relative paths in the manifest are resolved against its directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

/// Loads every map listed in a manifest, in manifest order. Reads run in
/// parallel; the result order does not depend on scheduling.
std::vector<FeatureMap> load_manifest_maps(const std::vector<ManifestEntry>& entries);

}  // namespace spoc
