#include "spoc/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "spoc/error.hpp"
#include "spoc/kernels.hpp"

namespace spoc {

double prior_sigma(std::uint32_t height, std::uint32_t width, const CenterPriorConfig& prior) {
  if (prior.sigma) {
    if (!(*prior.sigma > 0.0)) fail(ErrorCode::InvalidArgument, "sigma must be positive");
    return *prior.sigma;
  }
  return static_cast<double>(std::min(height, width)) / 6.0;
}

WeightGrid gaussian_weights(std::uint32_t height, std::uint32_t width,
                            const CenterPriorConfig& prior) {
  if (height == 0 || width == 0) fail(ErrorCode::InvalidArgument, "empty weight grid");
  WeightGrid grid{height, width, std::vector<double>(std::size_t{height} * width, 1.0)};
  if (!prior.enabled) return grid;

  const double sigma = prior_sigma(height, width, prior);
  const double cy = height / 2.0;
  const double cx = width / 2.0;
  const double denom = 2.0 * sigma * sigma;
  for (std::uint32_t y = 1; y <= height; ++y) {
    for (std::uint32_t x = 1; x <= width; ++x) {
      const double dy = y - cy;
      const double dx = x - cx;
      grid.values[std::size_t{y - 1} * width + (x - 1)] = std::exp(-(dy * dy + dx * dx) / denom);
    }
  }
  return grid;
}

Vector sum_pool(const FeatureMap& map, const CenterPriorConfig& prior) {
  if (!prior.enabled) {
    return to_vector(kernels::weighted_channel_sums(map.data(), map.channels(), map.cells(), {}));
  }
  return sum_pool(map, gaussian_weights(map.height(), map.width(), prior));
}

Vector sum_pool(const FeatureMap& map, const WeightGrid& weights) {
  if (weights.height != map.height() || weights.width != map.width()) {
    fail(ErrorCode::DimensionMismatch, "weight grid does not match feature map");
  }
  return to_vector(
      kernels::weighted_channel_sums(map.data(), map.channels(), map.cells(), weights.values));
}

Vector max_pool(const FeatureMap& map) {
  return to_vector(kernels::channel_max(map.data(), map.channels(), map.cells()));
}

}  // namespace spoc
