#include "spoc/linalg.hpp"

#include "spoc/error.hpp"

namespace spoc {

Matrix stack_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) fail(ErrorCode::DimensionMismatch, "ragged rows");
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

}  // namespace spoc
