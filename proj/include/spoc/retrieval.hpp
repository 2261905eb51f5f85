#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spoc/aggregate.hpp"
#include "spoc/feature_store.hpp"
#include "spoc/linalg.hpp"
#include "spoc/postprocess.hpp"

namespace spoc {

inline constexpr double kUnitNormTolerance = 1e-5;

/// Unit-norm descriptors in insertion order, stored as float32 rows.
class DescriptorIndex {
 public:
  DescriptorIndex() = default;

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> matrix() const { return matrix_; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(matrix_).subspan(i * dim_, dim_);
  }
  /// Position of `id`, or size() when absent.
  std::size_t find(const std::string& id) const;

  friend DescriptorIndex build_index(const std::vector<std::pair<std::string, Vector>>&);
  friend DescriptorIndex decode_index(std::string_view);

  bool operator==(const DescriptorIndex&) const = default;

 private:
  std::vector<std::string> ids_;
  std::vector<float> matrix_;
  std::size_t dim_ = 0;
};

/// Throws DuplicateId, DimensionMismatch or NotNormalized (|norm - 1| > 1e-5).
DescriptorIndex build_index(const std::vector<std::pair<std::string, Vector>>& descriptors);

/// Header "SPOCINDX", u32 version, u32 N, u32 count, then per id a u32
/// byte length and UTF-8 bytes, then the count x N float32 matrix.
std::string encode_index(const DescriptorIndex& index);
DescriptorIndex decode_index(std::string_view bytes);
DescriptorIndex read_index(const std::filesystem::path& path);
void write_index(const DescriptorIndex& index, const std::filesystem::path& path);

struct SearchHit {
  std::string id;
  double similarity = 0.0;
  std::size_t position = 0;  ///< insertion index
};

/// Exhaustive top-k by scalar product; equal scores keep insertion order.
std::vector<SearchHit> search(const DescriptorIndex& index, const Vector& query, std::size_t k);

/// Inclusive box in input-pixel coordinates.
struct QueryBox {
  std::int64_t x_min = 0;
  std::int64_t y_min = 0;
  std::int64_t x_max = 0;
  std::int64_t y_max = 0;
};

/// Parses "x0,y0,x1,y1".
QueryBox parse_query_box(std::string_view text);

/// Sub-grid of cells whose receptive-field centers fall inside a box. The
/// map keeps the parent's geometry; `first_x`/`first_y` locate its (1,1)
/// cell in the parent grid.
struct CroppedMap {
  FeatureMap map;
  std::uint32_t first_x = 1;
  std::uint32_t first_y = 1;
};

/// Throws InvalidArgument for a malformed box and EmptyCrop when no center
/// lies inside it.
CroppedMap crop_filter_features(const FeatureMap& map, const QueryBox& box);

/// Slice of full-image weights covering a crop (the alternative to
/// recomputing the prior on the cropped grid).
WeightGrid crop_weights(const WeightGrid& full, const CroppedMap& crop);

/// H x W cosine similarities between PCA-projected local features and a
/// target descriptor. Cells whose projection is zero score 0.
Matrix similarity_heatmap(const FeatureMap& query_map, const PcaWhiteningModel& model,
                          const Vector& target);

/// H lines of W comma-separated values.
std::string heatmap_csv(const Matrix& heatmap);

}  // namespace spoc
