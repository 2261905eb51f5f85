#pragma once

// Seeded synthetic data: feature maps with planted structure for tests, the
// CLI `synth` command and benchmarks.

#include <cstdint>
#include <string>
#include <vector>

#include "spoc/evaluation.hpp"
#include "spoc/feature_store.hpp"
#include "spoc/linalg.hpp"
#include "spoc/random.hpp"

namespace spoc::synthetic {

/// Values uniform in [lo, hi), stride-16 geometry.
FeatureMap random_map(Rng& rng, std::string id, std::uint32_t channels, std::uint32_t height,
                      std::uint32_t width, double lo = -1.0, double hi = 1.0);

struct SceneCorpusConfig {
  std::uint32_t scenes = 10;
  std::uint32_t images_per_scene = 5;
  std::uint32_t holdout_images = 40;
  std::uint32_t channels = 32;
  std::uint32_t height = 12;
  std::uint32_t width = 12;
  std::uint64_t seed = 1;
  /// Count the query among its own relevant images (UKB convention).
  bool include_self = false;
};

/// Scenes are sets of non-negative part vectors placed near the image
/// center over shared background clutter. Hold-out images come from
/// different scenes.
struct SceneCorpus {
  std::vector<FeatureMap> images;
  std::vector<FeatureMap> holdout;
  GroundTruth truth;
};

SceneCorpus make_scene_corpus(const SceneCorpusConfig& config);

/// Each image has ceil(1% of cells) high-norm cells drawn near a
/// class-specific direction; every other cell is low-norm noise shared by
/// all classes. Labels are encoded in the ground truth.
struct NormBenchmark {
  std::vector<FeatureMap> maps;
  GroundTruth truth;
};

NormBenchmark make_norm_benchmark(std::uint64_t seed, std::uint32_t classes = 8,
                                  std::uint32_t images_per_class = 6,
                                  std::uint32_t channels = 32, std::uint32_t side = 20);

/// Tight Gaussian clusters (std `spread`) around centers uniform in [0,1)^d.
Matrix clustered_points(Rng& rng, const Matrix& centers, Eigen::Index count, double spread);
Matrix random_centers(Rng& rng, Eigen::Index count, Eigen::Index dim);

/// Uniform in [0,1)^d.
Matrix uniform_points(Rng& rng, Eigen::Index count, Eigen::Index dim);

/// The `count` rows of largest l2 norm (ties by row order).
Matrix top_norm_rows(const Matrix& points, Eigen::Index count);

}  // namespace spoc::synthetic
