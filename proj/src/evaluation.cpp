#include "spoc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "spoc/binary_io.hpp"
#include "spoc/error.hpp"
#include "spoc/kernels.hpp"
#include "spoc/postprocess.hpp"
#include "spoc/random.hpp"

namespace spoc {

GroundTruth parse_ground_truth(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader, std::string("ground truth: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::MalformedHeader, "ground truth must be a JSON object");
  GroundTruth truth;
  try {
    for (const auto& [query, entry] : doc.items()) {
      TruthEntry t;
      for (const auto& id : entry.value("relevant", nlohmann::json::array())) {
        t.relevant.insert(id.get<std::string>());
      }
      for (const auto& id : entry.value("junk", nlohmann::json::array())) {
        t.junk.insert(id.get<std::string>());
      }
      if (entry.contains("box")) {
        const auto b = entry["box"].get<std::vector<std::int64_t>>();
        if (b.size() != 4) fail(ErrorCode::MalformedHeader, "box must have 4 coordinates");
        t.box = QueryBox{b[0], b[1], b[2], b[3]};
      }
      for (const auto& id : t.relevant) {
        if (t.junk.count(id)) {
          fail(ErrorCode::MalformedHeader, "'" + id + "' is both relevant and junk for " + query);
        }
      }
      truth.emplace(query, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader, std::string("ground truth: ") + e.what());
  }
  return truth;
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  return parse_ground_truth(io::read_file(path));
}

std::string encode_ground_truth(const GroundTruth& truth) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [query, t] : truth) {
    nlohmann::json entry = {{"relevant", t.relevant}, {"junk", t.junk}};
    if (t.box) entry["box"] = {t.box->x_min, t.box->y_min, t.box->x_max, t.box->y_max};
    doc[query] = std::move(entry);
  }
  return doc.dump(2) + "\n";
}

double average_precision(const std::vector<std::string>& ranking, const TruthEntry& truth) {
  if (truth.relevant.empty()) fail(ErrorCode::EmptyRelevantSet, "query has no relevant images");
  std::size_t rank = 0;
  std::size_t hits = 0;
  double sum = 0.0;
  for (const auto& id : ranking) {
    if (truth.junk.count(id)) continue;
    ++rank;
    if (truth.relevant.count(id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
  }
  return sum / static_cast<double>(truth.relevant.size());
}

double mean_average_precision(const Rankings& results, const GroundTruth& truth) {
  if (results.empty()) fail(ErrorCode::MissingTruth, "no query results");
  double total = 0.0;
  for (const auto& [query, ranking] : results) {
    auto it = truth.find(query);
    if (it == truth.end()) fail(ErrorCode::MissingTruth, "no ground truth for '" + query + "'");
    total += average_precision(ranking, it->second);
  }
  return total / static_cast<double>(results.size());
}

double ukb_query_score(const std::vector<std::string>& ranking, const TruthEntry& truth) {
  if (ranking.size() < 4) {
    fail(ErrorCode::ShortRanking, "UKB scoring needs at least 4 results, got " +
                                      std::to_string(ranking.size()));
  }
  return static_cast<double>(std::count_if(ranking.begin(), ranking.begin() + 4,
                                           [&](const std::string& id) {
                                             return truth.relevant.count(id) > 0;
                                           }));
}

double ukb_score(const Rankings& results, const GroundTruth& truth) {
  if (results.empty()) fail(ErrorCode::MissingTruth, "no query results");
  double total = 0.0;
  for (const auto& [query, ranking] : results) {
    auto it = truth.find(query);
    if (it == truth.end()) fail(ErrorCode::MissingTruth, "no ground truth for '" + query + "'");
    total += ukb_query_score(ranking, it->second);
  }
  return total / static_cast<double>(results.size());
}

std::vector<double> distance_ratio_single(const Vector& query, const Matrix& reference,
                                          std::size_t k_max) {
  if (static_cast<std::size_t>(reference.rows()) <= k_max) {
    fail(ErrorCode::InsufficientReference, "reference set needs more than " +
                                               std::to_string(k_max) + " features");
  }
  if (query.size() != reference.cols()) {
    fail(ErrorCode::DimensionMismatch, "query and reference dimensions differ");
  }
  auto dist = kernels::squared_distances(
      {reference.data(), static_cast<std::size_t>(reference.size())},
      static_cast<std::size_t>(reference.cols()), as_span(query));
  for (auto& d : dist) d = std::sqrt(d);

  const std::size_t n = dist.size();
  std::vector<double> work = dist;
  const auto mid = work.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(work.begin(), mid, work.end());
  double median = *mid;
  if (n % 2 == 0) median = 0.5 * (median + *std::max_element(work.begin(), mid));
  if (!(median > 0.0)) fail(ErrorCode::NumericFailure, "median distance is zero");

  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_max), dist.end());
  std::vector<double> curve(k_max);
  for (std::size_t k = 0; k < k_max; ++k) curve[k] = dist[k] / median;
  return curve;
}

RatioCurve distance_ratio_curve(const Matrix& queries, const Matrix& reference,
                                std::size_t k_max) {
  if (queries.rows() == 0) fail(ErrorCode::InvalidArgument, "no query features");
  RatioCurve curve{std::vector<double>(k_max, 0.0)};
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const auto single = distance_ratio_single(queries.row(q).transpose(), reference, k_max);
    for (std::size_t k = 0; k < k_max; ++k) curve.ratios[k] += single[k];
  }
  for (auto& r : curve.ratios) r /= static_cast<double>(queries.rows());
  return curve;
}

std::size_t selection_count(const FeatureMap& map, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "selection fraction must lie in (0, 1]");
  }
  const auto cells = map.cells();
  // The small slack keeps exact products such as 0.01 * 100 from rounding up.
  const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(cells) - 1e-9));
  return std::clamp<std::size_t>(count, 1, cells);
}

std::vector<LocalFeature> select_top_norm_features(const FeatureMap& map, double fraction) {
  const auto count = selection_count(map, fraction);
  const auto cells = map.cells();
  std::vector<double> norms(cells, 0.0);
  for (std::uint32_t c = 0; c < map.channels(); ++c) {
    const auto plane = map.channel(c);
    for (std::size_t i = 0; i < cells; ++i) norms[i] += double{plane[i]} * plane[i];
  }
  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Cell index order is (y, x) lexicographic.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
  std::vector<LocalFeature> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto cell = order[i];
    out.push_back(map.local_feature(static_cast<std::uint32_t>(cell % map.width()) + 1,
                                    static_cast<std::uint32_t>(cell / map.width()) + 1));
  }
  return out;
}

std::vector<LocalFeature> select_random_features(const FeatureMap& map, double fraction,
                                                 std::uint64_t seed) {
  const auto count = selection_count(map, fraction);
  const auto cells = map.cells();
  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(order[i], order[i + rng.index(cells - i)]);
  }
  order.resize(count);
  std::sort(order.begin(), order.end());
  std::vector<LocalFeature> out;
  out.reserve(count);
  for (auto cell : order) {
    out.push_back(map.local_feature(static_cast<std::uint32_t>(cell % map.width()) + 1,
                                    static_cast<std::uint32_t>(cell / map.width()) + 1));
  }
  return out;
}

Vector sum_features(const std::vector<LocalFeature>& features) {
  if (features.empty()) fail(ErrorCode::InvalidArgument, "no features to sum");
  Vector total = Vector::Zero(static_cast<Eigen::Index>(features.front().vector.size()));
  for (const auto& f : features) {
    for (std::size_t c = 0; c < f.vector.size(); ++c) total[static_cast<Eigen::Index>(c)] += f.vector[c];
  }
  return total;
}

std::vector<std::string> rank_all(const DescriptorIndex& index, const Vector& query,
                                  const std::string& query_id, bool include_self) {
  std::vector<std::string> ids;
  ids.reserve(index.size());
  for (auto& hit : search(index, query, index.size())) {
    if (!include_self && hit.id == query_id) continue;
    ids.push_back(std::move(hit.id));
  }
  return ids;
}

double subsample_retrieval_map(const std::vector<FeatureMap>& maps, const GroundTruth& truth,
                               double fraction, FeatureSelection selection, std::uint64_t seed) {
  std::vector<std::pair<std::string, Vector>> descriptors(maps.size());
  const auto n = static_cast<std::ptrdiff_t>(maps.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto picked = selection == FeatureSelection::TopNorm
                            ? select_top_norm_features(maps[i], fraction)
                            : select_random_features(maps[i], fraction,
                                                     seed + static_cast<std::uint64_t>(i));
    descriptors[i] = {maps[i].image_id(), sum_features(picked)};
  }
  for (auto& [id, v] : descriptors) v = l2_normalize(v);
  const auto index = build_index(descriptors);

  Rankings rankings;
  for (const auto& [query, entry] : truth) {
    const auto pos = index.find(query);
    if (pos == index.size()) fail(ErrorCode::MissingTruth, "query '" + query + "' not in maps");
    rankings[query] = rank_all(index, descriptors[pos].second, query, false);
  }
  return mean_average_precision(rankings, truth);
}

}  // namespace spoc
