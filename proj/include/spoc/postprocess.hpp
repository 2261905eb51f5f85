#pragma once

#include "spoc/linalg.hpp"

namespace spoc {

/// v / ||v||_2; throws ZeroVector when ||v|| == 0.
Vector l2_normalize(const Vector& v);

/// sign(v_i) * |v_i|^alpha, 0 < alpha <= 1.
Vector power_normalize(const Vector& v, double alpha);

/// PCA rotation with optional whitening.
///
/// `components` holds the top-N principal directions as orthonormal rows,
/// each signed so that its largest-magnitude entry is positive.
/// `singulars` are the singular values of the centered data matrix divided
/// by sqrt(n - 1), i.e. the per-component standard deviations, so whitened
/// training data has unit sample covariance.
struct PcaWhiteningModel {
  Vector mean;
  Matrix components;
  Vector singulars;
  bool whiten = true;
  bool center = true;  ///< false applies the rotation to uncentered input
  double explained_variance = 0.0;  ///< fraction of total variance kept

  Eigen::Index input_dim() const { return components.cols(); }
  Eigen::Index output_dim() const { return components.rows(); }
};

/// Fits on one sample per row. Needs more samples than `output_dim` and
/// throws RankDeficient when s_N < 1e-10 * s_1.
PcaWhiteningModel fit_pca(const Matrix& samples, Eigen::Index output_dim, bool whiten,
                          bool center = true);

/// Keeps the leading components (at most `max_dim`) whose singular value is
/// at least `rel_tol` * s_1. Used where the usable rank is data dependent.
PcaWhiteningModel fit_pca_full_rank(const Matrix& samples, Eigen::Index max_dim, bool whiten,
                                    double rel_tol = 1e-6);

/// components * (v - mean), divided by the singular values when whitening.
Vector apply_pca(const PcaWhiteningModel& model, const Vector& v);

/// Largest |M M^T - I| entry.
double orthonormality_error(const Matrix& rows);

}  // namespace spoc
