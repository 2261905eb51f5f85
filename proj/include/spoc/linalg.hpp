#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace spoc {

using Vector = Eigen::VectorXd;
/// Row-major so that one sample per row maps onto contiguous memory.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Vector to_vector(std::span<const double> values) {
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline Vector to_vector(std::span<const float> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Stacks equally sized vectors as rows.
Matrix stack_rows(const std::vector<Vector>& rows);

}  // namespace spoc
