#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

#include "spoc/pipeline.hpp"
#include "spoc/random.hpp"
#include "spoc/synthetic.hpp"

using namespace spoc;

namespace {

std::vector<FeatureMap> random_maps(std::uint64_t seed, int count, std::uint32_t channels,
                                    std::uint32_t side) {
  Rng rng(seed);
  std::vector<FeatureMap> maps;
  for (int i = 0; i < count; ++i) {
    maps.push_back(synthetic::random_map(rng, "h" + std::to_string(i), channels, side, side, 0.0, 1.0));
  }
  return maps;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("method presets") {
  const auto spoc = PipelineConfig::for_method("spoc");
  CHECK(spoc.aggregation == Aggregation::Sum);
  CHECK(spoc.center_prior.enabled);
  CHECK(spoc.whiten);
  CHECK(spoc.dims == 256);
  CHECK_FALSE(spoc.power_alpha);
  CHECK_FALSE(PipelineConfig::for_method("spoc-nocenter").center_prior.enabled);
  const auto max = PipelineConfig::for_method("max");
  CHECK(max.aggregation == Aggregation::Max);
  CHECK_FALSE(max.whiten);
  for (auto name : {"fv", "vlad", "temb"}) {
    const auto c = PipelineConfig::for_method(name);
    CHECK(c.power_alpha == 0.5);
    CHECK_FALSE(c.whiten);
    CHECK(to_string(c.aggregation) == name);
  }
  CHECK(PipelineConfig::for_method("temb").codebook_size == 1);
  CHECK_ERROR(PipelineConfig::for_method("bow"), ErrorCode::InvalidArgument);
  CHECK(parse_aggregation("fv") == Aggregation::Fisher);
  CHECK_ERROR(parse_aggregation("x"), ErrorCode::InvalidArgument);
}

TEST_CASE("SPoC descriptor equals the manual composition of its stages") {
  const auto holdout = random_maps(1, 40, 12, 5);
  auto config = PipelineConfig::for_method("spoc");
  config.dims = 8;
  const auto models = fit_descriptor_models(holdout, config, 3, 0);
  Rng rng(2);
  const auto map = synthetic::random_map(rng, "q", 12, 5, 5, 0.0, 1.0);

  const Vector pooled = sum_pool(map, config.center_prior);
  const Vector normalized = pooled / pooled.norm();
  const Vector projected = models.pca.components * (normalized - models.pca.mean);
  const Vector whitened = projected.cwiseQuotient(models.pca.singulars);
  const Vector expected = whitened / whitened.norm();
  CHECK((spoc_descriptor(map, models.pca, config) - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(compute_descriptor(map, models, config) == spoc_descriptor(map, models.pca, config));
}

TEST_CASE("Fisher descriptor equals the manual composition of its stages") {
  const auto holdout = random_maps(3, 30, 6, 4);
  auto config = PipelineConfig::for_method("fv");
  config.codebook_size = 2;
  config.dims = 10;
  const auto models = fit_descriptor_models(holdout, config, 5, 0);
  REQUIRE(models.embedder);
  Rng rng(4);
  const auto map = synthetic::random_map(rng, "q", 6, 4, 4, 0.0, 1.0);

  Vector agg = Vector::Zero(embedding_dim(*models.embedder));
  for (std::uint32_t y = 1; y <= 4; ++y) {
    for (std::uint32_t x = 1; x <= 4; ++x) {
      const auto f = map.local_feature(x, y).vector;
      agg += embed_feature(*models.embedder, to_vector(std::span<const float>(f)));
    }
  }
  Vector powered = agg;
  for (auto& v : powered) v = std::copysign(std::sqrt(std::abs(v)), v);
  powered /= powered.norm();
  Vector projected = models.pca.components * (powered - models.pca.mean);
  projected /= projected.norm();
  CHECK((competitor_descriptor(map, models, config) - projected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("property: every method yields unit norm descriptors of the requested size") {
  const auto holdout = random_maps(5, 40, 8, 4);
  Rng rng(6);
  for (auto method : {"spoc", "spoc-nocenter", "max", "fv", "vlad", "temb"}) {
    auto config = PipelineConfig::for_method(method);
    config.dims = 6;
    config.codebook_size = std::min<Eigen::Index>(config.codebook_size, 2);
    const auto models = fit_descriptor_models(holdout, config, 7, 0);
    for (int t = 0; t < 5; ++t) {
      const auto map = synthetic::random_map(rng, "q", 8, 4, 4, 0.0, 1.0);
      const auto d = compute_descriptor(map, models, config);
      CHECK(d.size() == 6);
      CHECK(std::abs(d.norm() - 1.0) < 1e-6);
      CHECK(compute_descriptor(map, models, config) == d);
    }
  }
}

TEST_CASE("property: sum and max descriptors ignore positive scaling") {
  const auto holdout = random_maps(7, 40, 8, 4);
  Rng rng(8);
  for (auto method : {"spoc", "spoc-nocenter", "max"}) {
    auto config = PipelineConfig::for_method(method);
    config.dims = 6;
    const auto models = fit_descriptor_models(holdout, config, 1, 0);
    for (int t = 0; t < 5; ++t) {
      const auto map = synthetic::random_map(rng, "q", 8, 4, 4, 0.0, 1.0);
      for (float s : {10.0f, 0.37f, 1234.5f}) {
        const Vector diff = compute_descriptor(map.scaled(s), models, config) -
                          compute_descriptor(map, models, config);
        CHECK(diff.cwiseAbs().maxCoeff() < 1e-6);
      }
    }
  }
}

TEST_CASE("fitting diagnostics and argument checks") {
  const auto holdout = random_maps(9, 20, 6, 3);
  auto config = PipelineConfig::for_method("fv");
  config.codebook_size = 2;
  config.dims = 4;
  FitDiagnostics diag;
  fit_descriptor_models(holdout, config, 2, 100, &diag);
  CHECK(diag.local_features == 100);
  CHECK_FALSE(diag.em_log_likelihood.empty());
  CHECK(diag.explained_variance > 0.0);

  auto too_wide = PipelineConfig::for_method("spoc");
  too_wide.dims = 7;
  CHECK_ERROR(fit_descriptor_models(holdout, too_wide, 1, 0), ErrorCode::InvalidArgument);
  CHECK_ERROR(fit_descriptor_models({}, too_wide, 1, 0), ErrorCode::InsufficientData);

  auto max = PipelineConfig::for_method("max");
  CHECK_ERROR(spoc_descriptor(holdout[0], PcaWhiteningModel{}, max), ErrorCode::InvalidArgument);
  CHECK_ERROR(pre_pca_vector(holdout[0], config, nullptr), ErrorCode::InvalidArgument);
}

TEST_CASE("all-zero map cannot be normalized") {
  const FeatureMap zero("z", 2, 2, 2, std::vector<float>(8, 0.0f), stride16_geometry(2, 2));
  CHECK_ERROR(pre_pca_vector(zero, PipelineConfig::for_method("spoc"), nullptr), ErrorCode::ZeroVector);
}

}  // TEST_SUITE
