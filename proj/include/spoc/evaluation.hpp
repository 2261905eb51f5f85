#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spoc/feature_store.hpp"
#include "spoc/linalg.hpp"
#include "spoc/retrieval.hpp"

namespace spoc {

struct TruthEntry {
  std::set<std::string> relevant;
  std::set<std::string> junk;
  std::optional<QueryBox> box;  ///< crop-query protocol
};

/// Query id -> truth. Ordered, so iteration is deterministic.
using GroundTruth = std::map<std::string, TruthEntry>;

/// JSON {query_id: {"relevant": [...], "junk": [...], "box": [x0,y0,x1,y1]?}}.
GroundTruth parse_ground_truth(std::string_view json_text);
GroundTruth read_ground_truth(const std::filesystem::path& path);
std::string encode_ground_truth(const GroundTruth& truth);

/// Junk ids are dropped from the ranking, then
/// AP = (1/R) * sum over hits of precision at the hit.
double average_precision(const std::vector<std::string>& ranking, const TruthEntry& truth);

using Rankings = std::map<std::string, std::vector<std::string>>;

/// Unweighted mean of per-query AP; throws MissingTruth.
double mean_average_precision(const Rankings& results, const GroundTruth& truth);

/// Same-object images among the top four. `relevant` must list the
/// object's images (including the query when self-matches count).
double ukb_query_score(const std::vector<std::string>& ranking, const TruthEntry& truth);
double ukb_score(const Rankings& results, const GroundTruth& truth);

/// ratios[k-1] = mean over queries of d_(k) / median(d).
struct RatioCurve {
  std::vector<double> ratios;
};

/// One query per row of `queries`; distances are Euclidean to every row of
/// `reference`. Throws InsufficientReference when reference rows <= k_max.
RatioCurve distance_ratio_curve(const Matrix& queries, const Matrix& reference,
                                std::size_t k_max);

/// Per-query curve, before averaging.
std::vector<double> distance_ratio_single(const Vector& query, const Matrix& reference,
                                          std::size_t k_max);

/// ceil(fraction * H * W), at least one.
std::size_t selection_count(const FeatureMap& map, double fraction);

/// Features with the largest l2 norms; ties by (y, x).
std::vector<LocalFeature> select_top_norm_features(const FeatureMap& map, double fraction);

/// Uniformly random cells (seeded), returned in (y, x) order.
std::vector<LocalFeature> select_random_features(const FeatureMap& map, double fraction,
                                                 std::uint64_t seed);

/// Sum of the selected local features.
Vector sum_features(const std::vector<LocalFeature>& features);

/// Full ranking of the index for one query, optionally dropping the query's
/// own id.
std::vector<std::string> rank_all(const DescriptorIndex& index, const Vector& query,
                                  const std::string& query_id, bool include_self);

enum class FeatureSelection { TopNorm, Random };

/// Retrieval mAP when each image is described by the l2-normalized sum of
/// only a fraction of its local features. Every truth query must be among
/// `maps`; queries are excluded from their own rankings.
double subsample_retrieval_map(const std::vector<FeatureMap>& maps, const GroundTruth& truth,
                               double fraction, FeatureSelection selection, std::uint64_t seed);

}  // namespace spoc
