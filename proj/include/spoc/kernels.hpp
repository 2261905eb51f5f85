#pragma once

// Data-parallel inner loops. Every kernel has a serial twin in
// kernels::reference; the OpenMP versions split work only across
// independent outputs and keep each output's reduction order, so both
// produce bit-identical results.

#include <cstddef>
#include <span>
#include <vector>

namespace spoc::kernels {

/// out[c] = sum_i weights[i] * data[c * cells + i]. Empty weights means all ones.
std::vector<double> weighted_channel_sums(std::span<const float> data, std::size_t channels,
                                          std::size_t cells, std::span<const double> weights);

/// out[c] = max_i data[c * cells + i].
std::vector<double> channel_max(std::span<const float> data, std::size_t channels,
                                std::size_t cells);

/// out[r] = <rows[r], query> for a row-major rows x dim float matrix.
std::vector<double> row_dots(std::span<const float> rows, std::size_t dim,
                             std::span<const double> query);

/// out[r] = ||rows[r] - query||^2 for a row-major rows x dim double matrix.
std::vector<double> squared_distances(std::span<const double> rows, std::size_t dim,
                                      std::span<const double> query);

namespace reference {

std::vector<double> weighted_channel_sums(std::span<const float> data, std::size_t channels,
                                          std::size_t cells, std::span<const double> weights);
std::vector<double> channel_max(std::span<const float> data, std::size_t channels,
                                std::size_t cells);
std::vector<double> row_dots(std::span<const float> rows, std::size_t dim,
                             std::span<const double> query);
std::vector<double> squared_distances(std::span<const double> rows, std::size_t dim,
                                      std::span<const double> query);

}  // namespace reference

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace spoc::kernels
