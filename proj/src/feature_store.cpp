#include "spoc/feature_store.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>

#include "json.hpp"

#include "spoc/binary_io.hpp"
#include "spoc/error.hpp"

namespace spoc {
namespace {

constexpr std::string_view kMagic = "SPOCFEAT";
constexpr std::uint32_t kVersion = 1;

void check_geometry(const ReceptiveFieldGeometry& g, std::uint32_t height, std::uint32_t width) {
  if (g.stride == 0 || g.input_height == 0 || g.input_width == 0) {
    fail(ErrorCode::ShapeMismatch, "geometry stride and input size must be positive");
  }
  auto last_center = [&](std::uint32_t cells) {
    return std::int64_t{g.offset} + std::int64_t{g.stride} * (std::int64_t{cells} - 1);
  };
  if (last_center(width) > std::int64_t{g.input_width} - 1 + g.stride ||
      last_center(height) > std::int64_t{g.input_height} - 1 + g.stride) {
    fail(ErrorCode::ShapeMismatch, "receptive field centers extend past the input image");
  }
}

}  // namespace

ReceptiveFieldGeometry reference_geometry() { return {16, 8, 586, 586}; }

ReceptiveFieldGeometry stride16_geometry(std::uint32_t height, std::uint32_t width) {
  return {16, 8, 16 * height, 16 * width};
}

FeatureMap::FeatureMap(std::string image_id, std::uint32_t channels, std::uint32_t height,
                       std::uint32_t width, std::vector<float> data,
                       ReceptiveFieldGeometry geometry)
    : image_id_(std::move(image_id)),
      channels_(channels),
      height_(height),
      width_(width),
      data_(std::move(data)),
      geometry_(geometry) {
  if (channels_ == 0 || height_ == 0 || width_ == 0) {
    fail(ErrorCode::ShapeMismatch, "feature map dimensions must be positive");
  }
  if (data_.size() != std::size_t{channels_} * height_ * width_) {
    fail(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                       " does not equal C*H*W");
  }
  if (!std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); })) {
    fail(ErrorCode::NonFiniteValue, "feature map '" + image_id_ + "' contains NaN or Inf");
  }
  check_geometry(geometry_, height_, width_);
}

LocalFeature FeatureMap::local_feature(std::uint32_t x, std::uint32_t y) const {
  if (x < 1 || x > width_ || y < 1 || y > height_) {
    fail(ErrorCode::OutOfBounds, "cell (" + std::to_string(x) + "," + std::to_string(y) +
                                     ") outside map");
  }
  LocalFeature f;
  f.x = x;
  f.y = y;
  f.vector.resize(channels_);
  for (std::uint32_t c = 0; c < channels_; ++c) f.vector[c] = at(c, y - 1, x - 1);
  return f;
}

FeatureMap FeatureMap::scaled(float factor) const {
  auto values = data_;
  for (auto& v : values) v *= factor;
  return FeatureMap(image_id_, channels_, height_, width_, std::move(values), geometry_);
}

PixelCenter receptive_field_center(const ReceptiveFieldGeometry& geometry, std::uint32_t height,
                                   std::uint32_t width, std::uint32_t x, std::uint32_t y) {
  if (x < 1 || x > width || y < 1 || y > height) {
    fail(ErrorCode::OutOfBounds, "cell (" + std::to_string(x) + "," + std::to_string(y) +
                                     ") outside " + std::to_string(width) + "x" +
                                     std::to_string(height) + " map");
  }
  auto center = [&](std::uint32_t i, std::uint32_t extent) {
    std::int64_t p = std::int64_t{geometry.offset} + (std::int64_t{i} - 1) * geometry.stride;
    return std::clamp<std::int64_t>(p, 0, std::int64_t{extent} - 1);
  };
  return {center(x, geometry.input_width), center(y, geometry.input_height)};
}

PixelCenter receptive_field_center(const FeatureMap& map, std::uint32_t x, std::uint32_t y) {
  return receptive_field_center(map.geometry(), map.height(), map.width(), x, y);
}

std::string encode_feature_file(const FeatureMap& map) {
  io::ByteWriter w;
  w.put_bytes(kMagic);
  w.put_u32(kVersion);
  w.put_u32(map.channels());
  w.put_u32(map.height());
  w.put_u32(map.width());
  const auto& g = map.geometry();
  w.put_u32(g.stride);
  w.put_u32(static_cast<std::uint32_t>(g.offset));
  w.put_u32(g.input_height);
  w.put_u32(g.input_width);
  w.put_u32(static_cast<std::uint32_t>(map.image_id().size()));
  w.put_bytes(map.image_id());
  for (float v : map.data()) w.put_f32(v);
  return w.bytes();
}

FeatureMap decode_feature_file(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (r.remaining() < kMagic.size() || r.take(kMagic.size()) != kMagic) {
    fail(ErrorCode::MalformedHeader, "missing SPOCFEAT magic");
  }
  if (r.remaining() < 9 * 4) fail(ErrorCode::MalformedHeader, "truncated header");
  if (auto version = r.get_u32(); version != kVersion) {
    fail(ErrorCode::MalformedHeader, "unsupported version " + std::to_string(version));
  }
  const auto channels = r.get_u32();
  const auto height = r.get_u32();
  const auto width = r.get_u32();
  ReceptiveFieldGeometry g;
  g.stride = r.get_u32();
  g.offset = static_cast<std::int32_t>(r.get_u32());
  g.input_height = r.get_u32();
  g.input_width = r.get_u32();
  const auto id_len = r.get_u32();
  if (id_len > r.remaining()) fail(ErrorCode::MalformedHeader, "image id runs past end of file");
  std::string image_id(r.take(id_len));

  const auto expected = std::uint64_t{channels} * height * width;
  if (r.remaining() % 4 != 0 || r.remaining() / 4 != expected) {
    fail(ErrorCode::ShapeMismatch, "payload holds " + std::to_string(r.remaining()) +
                                       " bytes, header declares " + std::to_string(expected) +
                                       " floats");
  }
  std::vector<float> data(expected);
  for (auto& v : data) v = r.get_f32();
  return FeatureMap(std::move(image_id), channels, height, width, std::move(data), g);
}

FeatureMap read_feature_file(const std::filesystem::path& path) {
  return decode_feature_file(io::read_file(path));
}

void write_feature_file(const FeatureMap& map, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_feature_file(map));
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader, "manifest " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) fail(ErrorCode::MalformedHeader, "manifest must be a JSON array");
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  entries.reserve(doc.size());
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("image_id") || !item.contains("path") ||
        !item["image_id"].is_string() || !item["path"].is_string()) {
      fail(ErrorCode::MalformedHeader, "manifest entries need string image_id and path");
    }
    std::filesystem::path p = item["path"].get<std::string>();
    if (p.is_relative()) p = base / p;
    entries.push_back({item["image_id"].get<std::string>(), p});
  }
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  auto doc = nlohmann::json::array();
  for (const auto& e : entries) {
    doc.push_back({{"image_id", e.image_id}, {"path", e.path.generic_string()}});
  }
  io::write_file_atomic(path, doc.dump(2) + "\n");
}

std::vector<FeatureMap> load_manifest_maps(const std::vector<ManifestEntry>& entries) {
  const auto n = static_cast<std::ptrdiff_t>(entries.size());
  std::vector<std::optional<FeatureMap>> slots(entries.size());
  std::vector<std::exception_ptr> errors(entries.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      slots[i].emplace(read_feature_file(entries[i].path));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  std::vector<FeatureMap> maps;
  maps.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    maps.push_back(std::move(*slots[i]));
  }
  return maps;
}

}  // namespace spoc
