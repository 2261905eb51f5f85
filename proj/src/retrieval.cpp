#include "spoc/retrieval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "spoc/binary_io.hpp"
#include "spoc/error.hpp"
#include "spoc/kernels.hpp"
#include "spoc/text.hpp"

namespace spoc {
namespace {

constexpr std::string_view kIndexMagic = "SPOCINDX";
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

std::size_t DescriptorIndex::find(const std::string& id) const {
  return static_cast<std::size_t>(std::find(ids_.begin(), ids_.end(), id) - ids_.begin());
}

DescriptorIndex build_index(const std::vector<std::pair<std::string, Vector>>& descriptors) {
  DescriptorIndex index;
  if (descriptors.empty()) return index;
  index.dim_ = static_cast<std::size_t>(descriptors.front().second.size());
  std::unordered_set<std::string> seen;
  index.ids_.reserve(descriptors.size());
  index.matrix_.reserve(descriptors.size() * index.dim_);
  for (const auto& [id, v] : descriptors) {
    if (!seen.insert(id).second) fail(ErrorCode::DuplicateId, "duplicate image id '" + id + "'");
    if (static_cast<std::size_t>(v.size()) != index.dim_) {
      fail(ErrorCode::DimensionMismatch, "descriptor '" + id + "' has " +
                                             std::to_string(v.size()) + " dims, expected " +
                                             std::to_string(index.dim_));
    }
    if (std::abs(v.norm() - 1.0) > kUnitNormTolerance) {
      fail(ErrorCode::NotNormalized, "descriptor '" + id + "' has norm " +
                                         format_number(v.norm()));
    }
    index.ids_.push_back(id);
    for (Eigen::Index j = 0; j < v.size(); ++j) index.matrix_.push_back(static_cast<float>(v[j]));
  }
  return index;
}

std::string encode_index(const DescriptorIndex& index) {
  io::ByteWriter w;
  w.put_bytes(kIndexMagic);
  w.put_u32(kIndexVersion);
  w.put_u32(static_cast<std::uint32_t>(index.dim()));
  w.put_u32(static_cast<std::uint32_t>(index.size()));
  for (const auto& id : index.ids()) {
    w.put_u32(static_cast<std::uint32_t>(id.size()));
    w.put_bytes(id);
  }
  for (float v : index.matrix()) w.put_f32(v);
  return w.bytes();
}

DescriptorIndex decode_index(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (r.remaining() < kIndexMagic.size() || r.take(kIndexMagic.size()) != kIndexMagic) {
    fail(ErrorCode::MalformedHeader, "missing SPOCINDX magic");
  }
  if (auto version = r.get_u32(); version != kIndexVersion) {
    fail(ErrorCode::MalformedHeader, "unsupported index version " + std::to_string(version));
  }
  DescriptorIndex index;
  index.dim_ = r.get_u32();
  const auto count = r.get_u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get_u32();
    index.ids_.emplace_back(r.take(len));
  }
  const auto expected = std::uint64_t{count} * index.dim_;
  if (r.remaining() != expected * 4) {
    fail(ErrorCode::ShapeMismatch, "index payload does not match N x count");
  }
  index.matrix_.resize(expected);
  for (auto& v : index.matrix_) v = r.get_f32();
  return index;
}

DescriptorIndex read_index(const std::filesystem::path& path) {
  return decode_index(io::read_file(path));
}

void write_index(const DescriptorIndex& index, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_index(index));
}

std::vector<SearchHit> search(const DescriptorIndex& index, const Vector& query, std::size_t k) {
  if (static_cast<std::size_t>(query.size()) != index.dim()) {
    fail(ErrorCode::DimensionMismatch, "query has " + std::to_string(query.size()) +
                                           " dims, index has " + std::to_string(index.dim()));
  }
  const auto scores = kernels::row_dots(index.matrix(), index.dim(), as_span(query));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  std::vector<SearchHit> hits;
  hits.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    hits.push_back({index.ids()[order[i]], scores[order[i]], order[i]});
  }
  return hits;
}

QueryBox parse_query_box(std::string_view text) {
  const auto parts = split(text, ',');
  if (parts.size() != 4) fail(ErrorCode::InvalidArgument, "crop box must be x0,y0,x1,y1");
  std::int64_t v[4];
  for (int i = 0; i < 4; ++i) {
    auto p = parts[i];
    while (!p.empty() && p.front() == ' ') p.remove_prefix(1);
    auto [end, ec] = std::from_chars(p.data(), p.data() + p.size(), v[i]);
    if (ec != std::errc{} || end != p.data() + p.size()) {
      fail(ErrorCode::InvalidArgument, "crop box coordinate '" + std::string(parts[i]) +
                                           "' is not an integer");
    }
  }
  return {v[0], v[1], v[2], v[3]};
}

CroppedMap crop_filter_features(const FeatureMap& map, const QueryBox& box) {
  const auto& g = map.geometry();
  if (box.x_min >= box.x_max || box.y_min >= box.y_max || box.x_min < 0 || box.y_min < 0 ||
      box.x_max > std::int64_t{g.input_width} - 1 || box.y_max > std::int64_t{g.input_height} - 1) {
    fail(ErrorCode::InvalidArgument, "crop box outside image or empty");
  }
  // Centers are monotone along each axis, so the kept cells form a rectangle.
  std::uint32_t x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  for (std::uint32_t x = 1; x <= map.width(); ++x) {
    const auto px = receptive_field_center(map, x, 1).px;
    if (px >= box.x_min && px <= box.x_max) {
      if (x0 == 0) x0 = x;
      x1 = x;
    }
  }
  for (std::uint32_t y = 1; y <= map.height(); ++y) {
    const auto py = receptive_field_center(map, 1, y).py;
    if (py >= box.y_min && py <= box.y_max) {
      if (y0 == 0) y0 = y;
      y1 = y;
    }
  }
  if (x0 == 0 || y0 == 0) fail(ErrorCode::EmptyCrop, "no receptive-field center inside the box");

  const std::uint32_t w = x1 - x0 + 1;
  const std::uint32_t h = y1 - y0 + 1;
  std::vector<float> data;
  data.reserve(std::size_t{map.channels()} * h * w);
  for (std::uint32_t c = 0; c < map.channels(); ++c) {
    for (std::uint32_t y = y0; y <= y1; ++y) {
      for (std::uint32_t x = x0; x <= x1; ++x) data.push_back(map.at(c, y - 1, x - 1));
    }
  }
  return {FeatureMap(map.image_id(), map.channels(), h, w, std::move(data), g), x0, y0};
}

WeightGrid crop_weights(const WeightGrid& full, const CroppedMap& crop) {
  const auto h = crop.map.height();
  const auto w = crop.map.width();
  if (crop.first_y + h - 1 > full.height || crop.first_x + w - 1 > full.width) {
    fail(ErrorCode::DimensionMismatch, "crop lies outside the weight grid");
  }
  WeightGrid out{h, w, {}};
  out.values.reserve(std::size_t{h} * w);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      out.values.push_back(full.at(crop.first_x + x, crop.first_y + y));
    }
  }
  return out;
}

Matrix similarity_heatmap(const FeatureMap& query_map, const PcaWhiteningModel& model,
                          const Vector& target) {
  if (target.size() != model.output_dim()) {
    fail(ErrorCode::DimensionMismatch, "target descriptor does not match PCA output");
  }
  const double target_norm = target.norm();
  if (!(target_norm > 0.0)) fail(ErrorCode::ZeroVector, "target descriptor is zero");

  Matrix heat(query_map.height(), query_map.width());
  const auto h = static_cast<std::ptrdiff_t>(query_map.height());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t row = 0; row < h; ++row) {
    Vector f(query_map.channels());
    for (std::uint32_t col = 0; col < query_map.width(); ++col) {
      for (std::uint32_t c = 0; c < query_map.channels(); ++c) {
        f[c] = query_map.at(c, static_cast<std::uint32_t>(row), col);
      }
      const Vector p = apply_pca(model, f);
      const double pn = p.norm();
      heat(row, col) = pn > 0.0 ? std::clamp(p.dot(target) / (pn * target_norm), -1.0, 1.0) : 0.0;
    }
  }
  return heat;
}

std::string heatmap_csv(const Matrix& heatmap) {
  std::string out;
  for (Eigen::Index r = 0; r < heatmap.rows(); ++r) {
    for (Eigen::Index c = 0; c < heatmap.cols(); ++c) {
      if (c > 0) out += ',';
      out += format_number(heatmap(r, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace spoc
