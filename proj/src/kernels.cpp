#include "spoc/kernels.hpp"

#include <algorithm>
#include <limits>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace spoc::kernels {
namespace {

// Per-output bodies shared by the serial and parallel drivers.

inline double channel_sum(const float* plane, std::size_t cells, std::span<const double> weights) {
  double acc = 0.0;
  if (weights.empty()) {
    for (std::size_t i = 0; i < cells; ++i) acc += static_cast<double>(plane[i]);
  } else {
    for (std::size_t i = 0; i < cells; ++i) acc += weights[i] * static_cast<double>(plane[i]);
  }
  return acc;
}

inline double plane_max(const float* plane, std::size_t cells) {
  float best = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < cells; ++i) best = std::max(best, plane[i]);
  return best;
}

inline double dot(const float* row, std::span<const double> q) {
  double acc = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) acc += static_cast<double>(row[j]) * q[j];
  return acc;
}

inline double sq_dist(const double* row, std::span<const double> q) {
  double acc = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double d = row[j] - q[j];
    acc += d * d;
  }
  return acc;
}

}  // namespace

std::vector<double> weighted_channel_sums(std::span<const float> data, std::size_t channels,
                                          std::size_t cells, std::span<const double> weights) {
  std::vector<double> out(channels);
  const auto n = static_cast<std::ptrdiff_t>(channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < n; ++c) {
    out[c] = channel_sum(data.data() + c * cells, cells, weights);
  }
  return out;
}

std::vector<double> channel_max(std::span<const float> data, std::size_t channels,
                                std::size_t cells) {
  std::vector<double> out(channels);
  const auto n = static_cast<std::ptrdiff_t>(channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < n; ++c) out[c] = plane_max(data.data() + c * cells, cells);
  return out;
}

std::vector<double> row_dots(std::span<const float> rows, std::size_t dim,
                             std::span<const double> query) {
  const std::size_t count = dim == 0 ? 0 : rows.size() / dim;
  std::vector<double> out(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) out[r] = dot(rows.data() + r * dim, query);
  return out;
}

std::vector<double> squared_distances(std::span<const double> rows, std::size_t dim,
                                      std::span<const double> query) {
  const std::size_t count = dim == 0 ? 0 : rows.size() / dim;
  std::vector<double> out(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) out[r] = sq_dist(rows.data() + r * dim, query);
  return out;
}

namespace reference {

std::vector<double> weighted_channel_sums(std::span<const float> data, std::size_t channels,
                                          std::size_t cells, std::span<const double> weights) {
  std::vector<double> out(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    out[c] = channel_sum(data.data() + c * cells, cells, weights);
  }
  return out;
}

std::vector<double> channel_max(std::span<const float> data, std::size_t channels,
                                std::size_t cells) {
  std::vector<double> out(channels);
  for (std::size_t c = 0; c < channels; ++c) out[c] = plane_max(data.data() + c * cells, cells);
  return out;
}

std::vector<double> row_dots(std::span<const float> rows, std::size_t dim,
                             std::span<const double> query) {
  const std::size_t count = dim == 0 ? 0 : rows.size() / dim;
  std::vector<double> out(count);
  for (std::size_t r = 0; r < count; ++r) out[r] = dot(rows.data() + r * dim, query);
  return out;
}

std::vector<double> squared_distances(std::span<const double> rows, std::size_t dim,
                                      std::span<const double> query) {
  const std::size_t count = dim == 0 ? 0 : rows.size() / dim;
  std::vector<double> out(count);
  for (std::size_t r = 0; r < count; ++r) out[r] = sq_dist(rows.data() + r * dim, query);
  return out;
}

}  // namespace reference

int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace spoc::kernels
