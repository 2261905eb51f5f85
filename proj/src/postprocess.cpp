#include "spoc/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "spoc/error.hpp"

namespace spoc {
namespace {

constexpr double kRankTolerance = 1e-10;

// Modified Gram-Schmidt on rows; the inputs are already nearly orthogonal so
// this only removes rounding drift.
void orthonormalize_rows(Matrix& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      rows.row(i) -= rows.row(i).dot(rows.row(j)) * rows.row(j);
    }
    rows.row(i) /= rows.row(i).norm();
  }
}

void fix_signs(Matrix& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Eigen::Index arg = 0;
    rows.row(i).cwiseAbs().maxCoeff(&arg);
    if (rows(i, arg) < 0) rows.row(i) *= -1.0;
  }
}

}  // namespace

Vector l2_normalize(const Vector& v) {
  const double n = v.norm();
  if (!(n > 0.0)) fail(ErrorCode::ZeroVector, "cannot l2-normalize a zero vector");
  if (!std::isfinite(n)) fail(ErrorCode::NumericFailure, "non-finite vector norm");
  return v / n;
}

Vector power_normalize(const Vector& v, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "power normalization exponent must lie in (0, 1]");
  }
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::pow(std::abs(v[i]), alpha);
    out[i] = v[i] < 0 ? -a : a;
  }
  return out;
}

namespace {

struct Spectrum {
  Vector mean;
  Matrix centered;
  Vector eigenvalues;  // descending, covariance with n - 1 denominator
  Eigen::MatrixXd eigenvectors;  // columns, ascending order as returned
  bool gram = false;
};

Spectrum decompose(const Matrix& samples) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index dim = samples.cols();
  Spectrum sp;
  sp.mean = samples.colwise().mean().transpose();
  sp.centered = samples.rowwise() - sp.mean.transpose();
  const double scale = 1.0 / static_cast<double>(n - 1);
  // Fewer samples than dimensions: decompose the Gram matrix instead.
  sp.gram = dim > n;
  const Eigen::MatrixXd second_moment =
      sp.gram ? Eigen::MatrixXd(sp.centered * sp.centered.transpose() * scale)
              : Eigen::MatrixXd(sp.centered.transpose() * sp.centered * scale);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(second_moment);
  if (solver.info() != Eigen::Success) fail(ErrorCode::NumericFailure, "eigensolver failed");
  sp.eigenvalues = solver.eigenvalues().reverse();
  sp.eigenvectors = solver.eigenvectors();
  return sp;
}

Eigen::Index numerical_rank(const Vector& eigenvalues, double rel_tol) {
  if (eigenvalues.size() == 0 || !(eigenvalues[0] > 0.0)) return 0;
  const double s1 = std::sqrt(eigenvalues[0]);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues[i] > 0.0 && std::sqrt(eigenvalues[i]) >= rel_tol * s1) ++rank;
  }
  return rank;
}

PcaWhiteningModel build_model(const Spectrum& sp, Eigen::Index output_dim, bool whiten,
                              bool center) {
  const Eigen::Index n = sp.centered.rows();
  const Eigen::Index dim = sp.centered.cols();
  const Eigen::Index total = sp.eigenvalues.size();
  const double scale = 1.0 / static_cast<double>(n - 1);

  const Eigen::Index rank = numerical_rank(sp.eigenvalues, kRankTolerance);
  if (rank < output_dim) {
    fail(ErrorCode::RankDeficient, "requested " + std::to_string(output_dim) +
                                       " components but data has rank " + std::to_string(rank));
  }

  Matrix directions(output_dim, dim);
  for (Eigen::Index i = 0; i < output_dim; ++i) {
    const Eigen::VectorXd u = sp.eigenvectors.col(total - 1 - i);
    if (sp.gram) {
      directions.row(i) =
          (sp.centered.transpose() * u).transpose() / std::sqrt(sp.eigenvalues[i] / scale);
    } else {
      directions.row(i) = u.transpose();
    }
  }
  orthonormalize_rows(directions);
  fix_signs(directions);

  PcaWhiteningModel model;
  model.whiten = whiten;
  model.center = center;
  model.mean = sp.mean;
  model.components = std::move(directions);
  model.singulars = sp.eigenvalues.head(output_dim).cwiseSqrt();

  double kept = 0.0;
  double all = 0.0;
  for (Eigen::Index i = 0; i < total; ++i) {
    const double lambda = std::max(sp.eigenvalues[i], 0.0);
    all += lambda;
    if (i < output_dim) kept += lambda;
  }
  model.explained_variance = all > 0.0 ? kept / all : 0.0;
  return model;
}

void check_fit_args(const Matrix& samples, Eigen::Index output_dim) {
  if (output_dim < 1) fail(ErrorCode::InvalidArgument, "PCA output dimension must be positive");
  if (output_dim > samples.cols()) {
    fail(ErrorCode::InvalidArgument, "PCA output dimension " + std::to_string(output_dim) +
                                         " exceeds input dimension " +
                                         std::to_string(samples.cols()));
  }
  if (samples.rows() <= output_dim) {
    fail(ErrorCode::InsufficientData, "PCA needs more than " + std::to_string(output_dim) +
                                          " samples, got " + std::to_string(samples.rows()));
  }
}

}  // namespace

PcaWhiteningModel fit_pca(const Matrix& samples, Eigen::Index output_dim, bool whiten,
                          bool center) {
  check_fit_args(samples, output_dim);
  return build_model(decompose(samples), output_dim, whiten, center);
}

PcaWhiteningModel fit_pca_full_rank(const Matrix& samples, Eigen::Index max_dim, bool whiten,
                                    double rel_tol) {
  max_dim = std::min({max_dim, samples.cols(), samples.rows() - 1});
  check_fit_args(samples, max_dim);
  const auto sp = decompose(samples);
  const auto keep = std::min(max_dim, numerical_rank(sp.eigenvalues, rel_tol));
  if (keep < 1) fail(ErrorCode::RankDeficient, "training data has no variance");
  return build_model(sp, keep, whiten, true);
}

Vector apply_pca(const PcaWhiteningModel& model, const Vector& v) {
  if (v.size() != model.input_dim()) {
    fail(ErrorCode::DimensionMismatch, "PCA expects " + std::to_string(model.input_dim()) +
                                           " dims, got " + std::to_string(v.size()));
  }
  Vector out = model.center ? Vector(model.components * (v - model.mean))
                            : Vector(model.components * v);
  if (model.whiten) out.array() /= model.singulars.array();
  return out;
}

double orthonormality_error(const Matrix& rows) {
  const Eigen::MatrixXd gram = rows * rows.transpose();
  return (gram - Eigen::MatrixXd::Identity(rows.rows(), rows.rows())).cwiseAbs().maxCoeff();
}

}  // namespace spoc
