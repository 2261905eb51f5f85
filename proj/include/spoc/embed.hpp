#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "spoc/feature_store.hpp"
#include "spoc/linalg.hpp"
#include "spoc/postprocess.hpp"

namespace spoc {

// ---------------------------------------------------------------------------
// Codebooks

struct KmeansCodebook {
  Matrix centroids;  ///< K x d
  int iterations = 0;

  Eigen::Index size() const { return centroids.rows(); }
  Eigen::Index dim() const { return centroids.cols(); }
};

/// Lloyd iterations from greedy k-means++ seeding. Stops once assignments
/// are stable or after 100 iterations. Bit-deterministic for a fixed seed.
KmeansCodebook fit_kmeans(const Matrix& features, Eigen::Index k, std::uint64_t seed);

/// Index of the nearest centroid; ties go to the lowest index.
Eigen::Index nearest_centroid(const KmeansCodebook& codebook, const Vector& x);

inline constexpr double kVarianceFloor = 1e-6;
inline constexpr double kMinComponentWeight = 1e-8;

/// Diagonal-covariance Gaussian mixture.
struct GmmModel {
  Vector weights;     ///< K, sums to one
  Matrix means;       ///< K x d
  Matrix variances;   ///< K x d, each >= kVarianceFloor

  Eigen::Index size() const { return means.rows(); }
  Eigen::Index dim() const { return means.cols(); }
};

struct GmmFit {
  GmmModel model;
  /// Total log-likelihood before each M-step, then of the returned model.
  std::vector<double> log_likelihood;
  int iterations = 0;
};

/// EM initialized from fit_kmeans with the same seed. Stops when the
/// relative log-likelihood gain drops below 1e-6 or after 200 iterations.
/// Throws InsufficientData (< 2K samples) or DegenerateComponent.
GmmFit fit_gmm(const Matrix& features, Eigen::Index k, std::uint64_t seed);

/// Posterior responsibilities gamma_k(x); sums to one.
Vector gmm_posteriors(const GmmModel& gmm, const Vector& x);
double gmm_log_likelihood(const GmmModel& gmm, const Matrix& features);

// ---------------------------------------------------------------------------
// Per-feature embeddings

/// K*d vector, zero except the nearest centroid's block which holds x - c_k.
Vector vlad_embed(const Vector& x, const KmeansCodebook& codebook);

/// 2*K*d gradient embedding. The first K*d entries are the mean gradients
/// gamma_k (x - mu_k) / sigma_k / sqrt(w_k), the last K*d the variance
/// gradients gamma_k ((x - mu_k)^2 / sigma_k^2 - 1) / sqrt(2 w_k).
Vector fisher_embed(const Vector& x, const GmmModel& gmm);

inline constexpr double kZeroResidual = 1e-12;

struct TriangEmbedding {
  Vector values;  ///< K*d, each block unit norm or exactly zero
  std::vector<Eigen::Index> zero_blocks;  ///< centroids x coincided with
};

/// Concatenated normalized residuals (x - c_k) / ||x - c_k||. A residual
/// shorter than kZeroResidual yields a zero block and is reported.
TriangEmbedding triang_embed(const Vector& x, const KmeansCodebook& codebook);

// ---------------------------------------------------------------------------
// Fitted embedders and aggregation

struct VladEmbedder {
  KmeansCodebook codebook;
};

/// Local features are PCA-compressed (rotation only) before the GMM.
struct FisherEmbedder {
  PcaWhiteningModel feature_pca;
  GmmModel gmm;
};

/// Mean and whitening of phi_TE over training features.
struct EmbeddingStats {
  PcaWhiteningModel whitening;
};

struct TriangOptions {
  bool sqrt_features = false;      ///< signed square root of inputs
  Eigen::Index drop_components = 0;  ///< leading whitened components removed
};

struct TriangEmbedder {
  KmeansCodebook codebook;
  EmbeddingStats stats;
  TriangOptions options;
};

using Embedder = std::variant<VladEmbedder, FisherEmbedder, TriangEmbedder>;

struct FisherOptions {
  Eigen::Index feature_dims = 32;
};

VladEmbedder fit_vlad(const Matrix& features, Eigen::Index k, std::uint64_t seed);
/// `em_history`, when given, receives the EM log-likelihood trace.
FisherEmbedder fit_fisher(const Matrix& features, Eigen::Index k, std::uint64_t seed,
                          FisherOptions options = {},
                          std::vector<double>* em_history = nullptr);
TriangEmbedder fit_triang(const Matrix& features, Eigen::Index k, std::uint64_t seed,
                          TriangOptions options = {});

Eigen::Index input_dim(const Embedder& embedder);
Eigen::Index embedding_dim(const Embedder& embedder);

/// Full per-feature chain including the embedder's pre/post transforms.
Vector embed_feature(const Embedder& embedder, const Vector& x);

/// Sum over all cells of embed_feature.
Vector aggregate_embedded(const FeatureMap& map, const Embedder& embedder);

/// All local features of `maps` as rows, optionally subsampled to at most
/// `limit` rows (seeded, order preserving). limit == 0 keeps everything.
Matrix collect_local_features(const std::vector<FeatureMap>& maps, std::size_t limit,
                              std::uint64_t seed);

}  // namespace spoc
