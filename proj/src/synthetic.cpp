#include "spoc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "spoc/error.hpp"

namespace spoc::synthetic {
namespace {

std::string numbered(const char* prefix, std::uint32_t a, std::uint32_t b) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%03u_%02u", prefix, a, b);
  return buf;
}

Vector relu_gaussian(Rng& rng, std::uint32_t dim, double scale) {
  Vector v(dim);
  for (auto& x : v) x = std::max(0.0, rng.normal()) * scale;
  return v;
}

FeatureMap scene_image(Rng& rng, std::string id, const std::vector<Vector>& parts,
                       const std::vector<Vector>& background, const SceneCorpusConfig& cfg) {
  const auto c_count = cfg.channels;
  const auto h = cfg.height;
  const auto w = cfg.width;
  const double cy = h / 2.0 + rng.uniform(-1.5, 1.5);
  const double cx = w / 2.0 + rng.uniform(-1.5, 1.5);
  const double radius = std::min(h, w) / 4.0 * rng.uniform(0.8, 1.2);

  std::vector<float> data(std::size_t{c_count} * h * w);
  for (std::uint32_t y = 1; y <= h; ++y) {
    for (std::uint32_t x = 1; x <= w; ++x) {
      const double dist = std::hypot(x - cx, y - cy);
      Vector cell;
      if (dist <= radius) {
        cell = parts[rng.index(parts.size())] * rng.uniform(0.8, 1.2);
      } else {
        cell = background[rng.index(background.size())] * rng.uniform(0.2, 0.6);
      }
      for (std::uint32_t c = 0; c < c_count; ++c) {
        const double v = cell[c] + std::abs(rng.normal(0.0, 0.1));
        data[(std::size_t{c} * h + (y - 1)) * w + (x - 1)] = static_cast<float>(v);
      }
    }
  }
  return FeatureMap(std::move(id), c_count, h, w, std::move(data), stride16_geometry(h, w));
}

}  // namespace

FeatureMap random_map(Rng& rng, std::string id, std::uint32_t channels, std::uint32_t height,
                      std::uint32_t width, double lo, double hi) {
  std::vector<float> data(std::size_t{channels} * height * width);
  for (auto& v : data) v = static_cast<float>(rng.uniform(lo, hi));
  return FeatureMap(std::move(id), channels, height, width, std::move(data),
                    stride16_geometry(height, width));
}

SceneCorpus make_scene_corpus(const SceneCorpusConfig& cfg) {
  if (cfg.scenes == 0 || cfg.images_per_scene == 0) {
    fail(ErrorCode::InvalidArgument, "corpus needs at least one scene and image");
  }
  Rng rng(cfg.seed);
  constexpr int kParts = 4;
  constexpr int kBackgrounds = 6;
  std::vector<Vector> background;
  for (int b = 0; b < kBackgrounds; ++b) background.push_back(relu_gaussian(rng, cfg.channels, 1.0));

  auto make_parts = [&] {
    std::vector<Vector> parts;
    for (int p = 0; p < kParts; ++p) parts.push_back(relu_gaussian(rng, cfg.channels, 1.5));
    return parts;
  };

  SceneCorpus corpus;
  for (std::uint32_t s = 0; s < cfg.scenes; ++s) {
    const auto parts = make_parts();
    std::vector<std::string> ids;
    for (std::uint32_t i = 0; i < cfg.images_per_scene; ++i) {
      ids.push_back(numbered("s", s, i));
      corpus.images.push_back(scene_image(rng, ids.back(), parts, background, cfg));
    }
    for (const auto& q : ids) {
      TruthEntry t;
      for (const auto& other : ids) {
        if (other != q || cfg.include_self) t.relevant.insert(other);
      }
      corpus.truth.emplace(q, std::move(t));
    }
  }

  const std::uint32_t per_scene = std::max<std::uint32_t>(cfg.images_per_scene, 1);
  std::vector<Vector> parts;
  for (std::uint32_t i = 0; i < cfg.holdout_images; ++i) {
    if (i % per_scene == 0) parts = make_parts();
    corpus.holdout.push_back(
        scene_image(rng, numbered("h", i / per_scene, i % per_scene), parts, background, cfg));
  }
  return corpus;
}

NormBenchmark make_norm_benchmark(std::uint64_t seed, std::uint32_t classes,
                                  std::uint32_t images_per_class, std::uint32_t channels,
                                  std::uint32_t side) {
  Rng rng(seed);
  const std::size_t cells = std::size_t{side} * side;
  const auto high_count = static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(cells)));

  std::vector<Vector> prototypes;
  for (std::uint32_t k = 0; k < classes; ++k) {
    Vector p = relu_gaussian(rng, channels, 1.0);
    if (p.norm() == 0.0) p[0] = 1.0;
    prototypes.push_back(p / p.norm());
  }

  NormBenchmark bench;
  std::vector<std::vector<std::string>> members(classes);
  for (std::uint32_t k = 0; k < classes; ++k) {
    for (std::uint32_t i = 0; i < images_per_class; ++i) {
      std::vector<float> data(channels * cells);
      for (auto& v : data) v = static_cast<float>(rng.uniform(0.0, 0.35));

      std::vector<std::size_t> order(cells);
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t j = 0; j < high_count; ++j) std::swap(order[j], order[j + rng.index(cells - j)]);
      for (std::size_t j = 0; j < high_count; ++j) {
        for (std::uint32_t c = 0; c < channels; ++c) {
          const double v = 8.0 * prototypes[k][c] + rng.normal(0.0, 0.3);
          data[c * cells + order[j]] = static_cast<float>(v);
        }
      }
      auto id = numbered("c", k, i);
      members[k].push_back(id);
      bench.maps.emplace_back(id, channels, side, side, std::move(data),
                              stride16_geometry(side, side));
    }
  }
  for (const auto& ids : members) {
    for (const auto& q : ids) {
      TruthEntry t;
      for (const auto& other : ids) {
        if (other != q) t.relevant.insert(other);
      }
      bench.truth.emplace(q, std::move(t));
    }
  }
  return bench;
}

Matrix random_centers(Rng& rng, Eigen::Index count, Eigen::Index dim) {
  return uniform_points(rng, count, dim);
}

Matrix clustered_points(Rng& rng, const Matrix& centers, Eigen::Index count, double spread) {
  Matrix out(count, centers.cols());
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto c = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(centers.rows())));
    for (Eigen::Index j = 0; j < centers.cols(); ++j) out(i, j) = centers(c, j) + rng.normal(0.0, spread);
  }
  return out;
}

Matrix uniform_points(Rng& rng, Eigen::Index count, Eigen::Index dim) {
  Matrix out(count, dim);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = rng.uniform();
  return out;
}

Matrix top_norm_rows(const Matrix& points, Eigen::Index count) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Vector norms = points.rowwise().norm();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return norms[a] > norms[b]; });
  count = std::min(count, points.rows());
  Matrix out(count, points.cols());
  for (Eigen::Index i = 0; i < count; ++i) out.row(i) = points.row(order[i]);
  return out;
}

}  // namespace spoc::synthetic
