#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "spoc/feature_store.hpp"
#include "spoc/linalg.hpp"

namespace spoc {

/// Gaussian center prior. Without an explicit sigma the width is one third
/// of the distance from the grid center to the closest boundary, i.e.
/// min(H, W) / 6 in cell units.
struct CenterPriorConfig {
  bool enabled = false;
  std::optional<double> sigma;

  static CenterPriorConfig off() { return {}; }
  static CenterPriorConfig third_of_center_to_boundary() { return {true, std::nullopt}; }
  static CenterPriorConfig with_sigma(double sigma) { return {true, sigma}; }
};

double prior_sigma(std::uint32_t height, std::uint32_t width, const CenterPriorConfig& prior);

/// Per-cell weights, row-major over (y, x).
struct WeightGrid {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<double> values;

  /// 1-based cell coordinates.
  double at(std::uint32_t x, std::uint32_t y) const {
    return values[std::size_t{y - 1} * width + (x - 1)];
  }
};

/// alpha(x, y) = exp(-((y - H/2)^2 + (x - W/2)^2) / (2 sigma^2)) with 1-based
/// x, y and real-valued H/2, W/2. All ones when the prior is disabled.
WeightGrid gaussian_weights(std::uint32_t height, std::uint32_t width,
                            const CenterPriorConfig& prior);

/// Weighted sum of the local features; double accumulation.
Vector sum_pool(const FeatureMap& map, const CenterPriorConfig& prior);
Vector sum_pool(const FeatureMap& map, const WeightGrid& weights);

/// Per-channel maximum over all cells.
Vector max_pool(const FeatureMap& map);

}  // namespace spoc
