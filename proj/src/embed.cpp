#include "spoc/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "spoc/error.hpp"
#include "spoc/random.hpp"

namespace spoc {
namespace {

constexpr int kKmeansMaxIterations = 100;
constexpr int kEmMaxIterations = 200;
constexpr double kEmRelativeTolerance = 1e-6;
constexpr double kEmMonotoneSlack = 1e-8;

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

Eigen::Index nearest_row(const Matrix& centroids, const Matrix& points, Eigen::Index i) {
  Eigen::Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
    const double dist = squared_distance(points, i, centroids, k);
    if (dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  return best;
}

// Greedy k-means++: each new center is the best of several D^2-sampled
// candidates, judged by the resulting potential.
Matrix seed_centroids(const Matrix& x, Eigen::Index k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matrix centroids(k, x.cols());
  const auto first = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
  centroids.row(0) = x.row(first);

  std::vector<double> closest(n);
  for (Eigen::Index i = 0; i < n; ++i) closest[i] = squared_distance(x, i, centroids, 0);

  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
  std::vector<double> cumulative(n);
  std::vector<double> candidate(n);
  std::vector<double> best(n);
  for (Eigen::Index c = 1; c < k; ++c) {
    std::partial_sum(closest.begin(), closest.end(), cumulative.begin());
    const double potential = cumulative.back();
    if (!(potential > 0.0)) {
      fail(ErrorCode::InsufficientData, "fewer than " + std::to_string(k) + " distinct features");
    }
    double best_potential = std::numeric_limits<double>::infinity();
    Eigen::Index best_index = -1;
    for (int t = 0; t < trials; ++t) {
      const double r = rng.uniform() * potential;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
      if (it == cumulative.end()) --it;
      const auto idx = static_cast<Eigen::Index>(it - cumulative.begin());
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        candidate[i] = std::min(closest[i], squared_distance(x, i, x, idx));
        total += candidate[i];
      }
      if (total < best_potential) {
        best_potential = total;
        best_index = idx;
        best.swap(candidate);
      }
    }
    centroids.row(c) = x.row(best_index);
    closest = best;
  }
  return centroids;
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// log w_k + log N(x | mu_k, diag(var_k)) for every component.
Eigen::RowVectorXd component_log_densities(const GmmModel& gmm, const Eigen::VectorXd& norm_terms,
                                           const double* x) {
  const Eigen::Index k = gmm.size();
  const Eigen::Index d = gmm.dim();
  Eigen::RowVectorXd out(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    double quad = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double diff = x[j] - gmm.means(c, j);
      quad += diff * diff / gmm.variances(c, j);
    }
    out[c] = norm_terms[c] - 0.5 * quad;
  }
  return out;
}

Eigen::VectorXd normalization_terms(const GmmModel& gmm) {
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  Eigen::VectorXd terms(gmm.size());
  for (Eigen::Index c = 0; c < gmm.size(); ++c) {
    double log_det = 0.0;
    for (Eigen::Index j = 0; j < gmm.dim(); ++j) log_det += std::log(gmm.variances(c, j));
    terms[c] = std::log(gmm.weights[c]) - 0.5 * (static_cast<double>(gmm.dim()) * log_2pi + log_det);
  }
  return terms;
}

// Fills log responsibilities (n x K) and returns the total log-likelihood.
double expectation(const GmmModel& gmm, const Matrix& x, Matrix& log_resp) {
  const Eigen::Index n = x.rows();
  const auto terms = normalization_terms(gmm);
  std::vector<double> per_sample(n);
  log_resp.resize(n, gmm.size());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto dens = component_log_densities(gmm, terms, x.row(i).data());
    const double lse = log_sum_exp(dens);
    log_resp.row(i) = dens.array() - lse;
    per_sample[i] = lse;
  }
  double total = 0.0;
  for (double v : per_sample) total += v;
  return total;
}

GmmModel maximization(const Matrix& x, const Matrix& log_resp) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = log_resp.cols();
  const Eigen::Index d = x.cols();
  const Matrix resp = log_resp.array().exp().matrix();

  GmmModel gmm;
  gmm.weights = Vector::Zero(k);
  gmm.means = Matrix::Zero(k, d);
  gmm.variances = Matrix::Zero(k, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < k; ++c) {
      gmm.weights[c] += resp(i, c);
      gmm.means.row(c) += resp(i, c) * x.row(i);
    }
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (gmm.weights[c] < kMinComponentWeight * static_cast<double>(n)) {
      fail(ErrorCode::DegenerateComponent,
           "mixture component " + std::to_string(c) + " lost all responsibility");
    }
    gmm.means.row(c) /= gmm.weights[c];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < k; ++c) {
      gmm.variances.row(c).array() += resp(i, c) * (x.row(i) - gmm.means.row(c)).array().square();
    }
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    gmm.variances.row(c) /= gmm.weights[c];
    gmm.variances.row(c) = gmm.variances.row(c).cwiseMax(kVarianceFloor);
  }
  gmm.weights /= gmm.weights.sum();
  return gmm;
}

GmmModel initial_mixture(const Matrix& x, const KmeansCodebook& codebook) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = codebook.size();
  const Eigen::Index d = x.cols();
  const Eigen::RowVectorXd global_mean = x.colwise().mean();
  const Eigen::RowVectorXd global_var =
      ((x.rowwise() - global_mean).array().square().colwise().sum() / static_cast<double>(n))
          .matrix();

  std::vector<Eigen::Index> counts(k, 0);
  Matrix spread = Matrix::Zero(k, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = nearest_row(codebook.centroids, x, i);
    ++counts[c];
    spread.row(c).array() += (x.row(i) - codebook.centroids.row(c)).array().square();
  }

  GmmModel gmm;
  gmm.weights.resize(k);
  gmm.means = codebook.centroids;
  gmm.variances.resize(k, d);
  for (Eigen::Index c = 0; c < k; ++c) {
    gmm.weights[c] = std::max<double>(counts[c], 1.0);
    if (counts[c] >= 2) {
      gmm.variances.row(c) = spread.row(c) / static_cast<double>(counts[c]);
    } else {
      gmm.variances.row(c) = global_var;
    }
    gmm.variances.row(c) = gmm.variances.row(c).cwiseMax(kVarianceFloor);
  }
  gmm.weights /= gmm.weights.sum();
  return gmm;
}

void require_dim(const Vector& x, Eigen::Index d, const char* what) {
  if (x.size() != d) {
    fail(ErrorCode::DimensionMismatch, std::string(what) + " expects " + std::to_string(d) +
                                           " dims, got " + std::to_string(x.size()));
  }
}

}  // namespace

KmeansCodebook fit_kmeans(const Matrix& features, Eigen::Index k, std::uint64_t seed) {
  const Eigen::Index n = features.rows();
  if (k < 1) fail(ErrorCode::InvalidArgument, "k-means needs K >= 1");
  if (n < k) {
    fail(ErrorCode::InsufficientData, "k-means with K=" + std::to_string(k) + " needs at least " +
                                          std::to_string(k) + " features, got " +
                                          std::to_string(n));
  }
  Rng rng(seed);
  KmeansCodebook cb;
  cb.centroids = seed_centroids(features, k, rng);

  std::vector<Eigen::Index> assign(n, -1);
  std::vector<Eigen::Index> next(n);
  for (int iter = 0; iter < kKmeansMaxIterations; ++iter) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) next[i] = nearest_row(cb.centroids, features, i);
    if (next == assign) break;
    assign = next;
    cb.iterations = iter + 1;

    Matrix sums = Matrix::Zero(k, features.cols());
    std::vector<Eigen::Index> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += features.row(i);
      ++counts[assign[i]];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      // Empty clusters keep their previous centroid.
      if (counts[c] > 0) cb.centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
    }
  }

  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a + 1; b < k; ++b) {
      if (cb.centroids.row(a) == cb.centroids.row(b)) {
        fail(ErrorCode::NumericFailure, "k-means produced coincident centroids");
      }
    }
  }
  return cb;
}

Eigen::Index nearest_centroid(const KmeansCodebook& codebook, const Vector& x) {
  require_dim(x, codebook.dim(), "codebook");
  Eigen::Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < codebook.size(); ++k) {
    const double dist = (codebook.centroids.row(k).transpose() - x).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  return best;
}

GmmFit fit_gmm(const Matrix& features, Eigen::Index k, std::uint64_t seed) {
  if (k < 1) fail(ErrorCode::InvalidArgument, "GMM needs K >= 1");
  if (features.rows() < 2 * k) {
    fail(ErrorCode::InsufficientData, "GMM with K=" + std::to_string(k) + " needs at least " +
                                          std::to_string(2 * k) + " features");
  }
  GmmFit fit;
  fit.model = initial_mixture(features, fit_kmeans(features, k, seed));

  Matrix log_resp;
  while (true) {
    const double ll = expectation(fit.model, features, log_resp);
    if (!std::isfinite(ll)) fail(ErrorCode::NumericFailure, "EM log-likelihood is not finite");
    fit.log_likelihood.push_back(ll);
    if (fit.log_likelihood.size() > 1) {
      const double prev = fit.log_likelihood[fit.log_likelihood.size() - 2];
      if (ll < prev - kEmMonotoneSlack * std::max(1.0, std::abs(prev))) {
        fail(ErrorCode::NumericFailure, "EM log-likelihood decreased");
      }
      if (ll - prev < kEmRelativeTolerance * std::abs(prev)) break;
    }
    if (fit.iterations == kEmMaxIterations) break;
    fit.model = maximization(features, log_resp);
    ++fit.iterations;
  }
  return fit;
}

Vector gmm_posteriors(const GmmModel& gmm, const Vector& x) {
  require_dim(x, gmm.dim(), "GMM");
  const auto dens = component_log_densities(gmm, normalization_terms(gmm), x.data());
  const double lse = log_sum_exp(dens);
  return (dens.array() - lse).exp().matrix().transpose();
}

double gmm_log_likelihood(const GmmModel& gmm, const Matrix& features) {
  Matrix scratch;
  return expectation(gmm, features, scratch);
}

Vector vlad_embed(const Vector& x, const KmeansCodebook& codebook) {
  const Eigen::Index d = codebook.dim();
  const auto k = nearest_centroid(codebook, x);
  Vector out = Vector::Zero(codebook.size() * d);
  out.segment(k * d, d) = x - codebook.centroids.row(k).transpose();
  return out;
}

Vector fisher_embed(const Vector& x, const GmmModel& gmm) {
  const Eigen::Index k = gmm.size();
  const Eigen::Index d = gmm.dim();
  const Vector gamma = gmm_posteriors(gmm, x);
  Vector out(2 * k * d);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double first_scale = gamma[c] / std::sqrt(gmm.weights[c]);
    const double second_scale = gamma[c] / std::sqrt(2.0 * gmm.weights[c]);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double diff = x[j] - gmm.means(c, j);
      const double var = gmm.variances(c, j);
      out[c * d + j] = first_scale * diff / std::sqrt(var);
      out[k * d + c * d + j] = second_scale * (diff * diff / var - 1.0);
    }
  }
  return out;
}

TriangEmbedding triang_embed(const Vector& x, const KmeansCodebook& codebook) {
  require_dim(x, codebook.dim(), "codebook");
  const Eigen::Index d = codebook.dim();
  TriangEmbedding e;
  e.values = Vector::Zero(codebook.size() * d);
  for (Eigen::Index k = 0; k < codebook.size(); ++k) {
    const Vector residual = x - codebook.centroids.row(k).transpose();
    const double norm = residual.norm();
    if (norm < kZeroResidual) {
      e.zero_blocks.push_back(k);
      continue;
    }
    e.values.segment(k * d, d) = residual / norm;
  }
  return e;
}

VladEmbedder fit_vlad(const Matrix& features, Eigen::Index k, std::uint64_t seed) {
  return {fit_kmeans(features, k, seed)};
}

FisherEmbedder fit_fisher(const Matrix& features, Eigen::Index k, std::uint64_t seed,
                          FisherOptions options, std::vector<double>* em_history) {
  const auto dims = std::min<Eigen::Index>(options.feature_dims, features.cols());
  FisherEmbedder fe;
  fe.feature_pca = fit_pca(features, dims, /*whiten=*/false);
  Matrix reduced(features.rows(), dims);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    reduced.row(i) = apply_pca(fe.feature_pca, features.row(i).transpose()).transpose();
  }
  auto fit = fit_gmm(reduced, k, seed);
  if (em_history) *em_history = fit.log_likelihood;
  fe.gmm = std::move(fit.model);
  return fe;
}

TriangEmbedder fit_triang(const Matrix& features, Eigen::Index k, std::uint64_t seed,
                          TriangOptions options) {
  if (options.drop_components < 0) {
    fail(ErrorCode::InvalidArgument, "drop_components must be non-negative");
  }
  Matrix inputs = features;
  if (options.sqrt_features) {
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
      inputs.row(i) = power_normalize(inputs.row(i).transpose(), 0.5).transpose();
    }
  }
  TriangEmbedder te;
  te.options = options;
  te.codebook = fit_kmeans(inputs, k, seed);
  Matrix embedded(inputs.rows(), k * inputs.cols());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    embedded.row(i) = triang_embed(inputs.row(i).transpose(), te.codebook).values.transpose();
  }
  te.stats.whitening = fit_pca_full_rank(embedded, embedded.cols(), /*whiten=*/true);
  if (options.drop_components >= te.stats.whitening.output_dim()) {
    fail(ErrorCode::InvalidArgument, "cannot drop " + std::to_string(options.drop_components) +
                                         " of " +
                                         std::to_string(te.stats.whitening.output_dim()) +
                                         " whitened components");
  }
  return te;
}

Eigen::Index input_dim(const Embedder& embedder) {
  return std::visit(
      [](const auto& e) -> Eigen::Index {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, FisherEmbedder>) {
          return e.feature_pca.input_dim();
        } else {
          return e.codebook.dim();
        }
      },
      embedder);
}

Eigen::Index embedding_dim(const Embedder& embedder) {
  return std::visit(
      [](const auto& e) -> Eigen::Index {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, VladEmbedder>) {
          return e.codebook.size() * e.codebook.dim();
        } else if constexpr (std::is_same_v<T, FisherEmbedder>) {
          return 2 * e.gmm.size() * e.gmm.dim();
        } else {
          return e.stats.whitening.output_dim() - e.options.drop_components;
        }
      },
      embedder);
}

Vector embed_feature(const Embedder& embedder, const Vector& x) {
  return std::visit(
      [&x](const auto& e) -> Vector {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, VladEmbedder>) {
          return vlad_embed(x, e.codebook);
        } else if constexpr (std::is_same_v<T, FisherEmbedder>) {
          return fisher_embed(apply_pca(e.feature_pca, x), e.gmm);
        } else {
          const Vector input = e.options.sqrt_features ? power_normalize(x, 0.5) : x;
          const Vector phi = triang_embed(input, e.codebook).values;
          const Vector white = apply_pca(e.stats.whitening, phi);
          Vector kept = white.tail(white.size() - e.options.drop_components);
          const double norm = kept.norm();
          if (norm > 0.0) kept /= norm;
          return kept;
        }
      },
      embedder);
}

Vector aggregate_embedded(const FeatureMap& map, const Embedder& embedder) {
  if (map.channels() != input_dim(embedder)) {
    fail(ErrorCode::DimensionMismatch, "embedder expects " + std::to_string(input_dim(embedder)) +
                                           " channels, map has " +
                                           std::to_string(map.channels()));
  }
  Vector total = Vector::Zero(embedding_dim(embedder));
  Vector x(map.channels());
  for (std::uint32_t row = 0; row < map.height(); ++row) {
    for (std::uint32_t col = 0; col < map.width(); ++col) {
      for (std::uint32_t c = 0; c < map.channels(); ++c) x[c] = map.at(c, row, col);
      total += embed_feature(embedder, x);
    }
  }
  return total;
}

Matrix collect_local_features(const std::vector<FeatureMap>& maps, std::size_t limit,
                              std::uint64_t seed) {
  if (maps.empty()) fail(ErrorCode::InsufficientData, "no feature maps");
  const auto channels = maps.front().channels();
  std::size_t total = 0;
  for (const auto& m : maps) {
    if (m.channels() != channels) {
      fail(ErrorCode::DimensionMismatch, "feature maps disagree on channel count");
    }
    total += m.cells();
  }
  std::vector<std::size_t> keep(total);
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  if (limit > 0 && limit < total) {
    Rng rng(seed);
    for (std::size_t i = 0; i < limit; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.index(total - i));
      std::swap(keep[i], keep[j]);
    }
    keep.resize(limit);
    std::sort(keep.begin(), keep.end());
  }

  Matrix out(static_cast<Eigen::Index>(keep.size()), channels);
  std::size_t map_index = 0;
  std::size_t map_start = 0;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    while (keep[r] >= map_start + maps[map_index].cells()) {
      map_start += maps[map_index].cells();
      ++map_index;
    }
    const auto& m = maps[map_index];
    const auto cell = keep[r] - map_start;
    const auto row = static_cast<std::uint32_t>(cell / m.width());
    const auto col = static_cast<std::uint32_t>(cell % m.width());
    for (std::uint32_t c = 0; c < channels; ++c) {
      out(static_cast<Eigen::Index>(r), c) = m.at(c, row, col);
    }
  }
  return out;
}

}  // namespace spoc
