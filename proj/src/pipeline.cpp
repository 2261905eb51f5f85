#include "spoc/pipeline.hpp"

#include <exception>
#include <string>

#include "spoc/error.hpp"

namespace spoc {

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Sum: return "sum";
    case Aggregation::Max: return "max";
    case Aggregation::Fisher: return "fv";
    case Aggregation::Vlad: return "vlad";
    case Aggregation::Triang: return "temb";
  }
  return "unknown";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "sum") return Aggregation::Sum;
  if (name == "max") return Aggregation::Max;
  if (name == "fv") return Aggregation::Fisher;
  if (name == "vlad") return Aggregation::Vlad;
  if (name == "temb") return Aggregation::Triang;
  fail(ErrorCode::InvalidArgument, "unknown aggregation '" + std::string(name) + "'");
}

PipelineConfig PipelineConfig::for_method(std::string_view method) {
  PipelineConfig c;
  if (method == "spoc") return c;
  if (method == "spoc-nocenter") {
    c.center_prior = CenterPriorConfig::off();
    return c;
  }
  c.center_prior = CenterPriorConfig::off();
  c.whiten = false;
  if (method == "max") {
    c.aggregation = Aggregation::Max;
    return c;
  }
  c.power_alpha = 0.5;
  if (method == "fv") {
    c.aggregation = Aggregation::Fisher;
  } else if (method == "vlad") {
    c.aggregation = Aggregation::Vlad;
  } else if (method == "temb") {
    c.aggregation = Aggregation::Triang;
    c.codebook_size = 1;
  } else {
    fail(ErrorCode::InvalidArgument, "unknown method '" + std::string(method) + "'");
  }
  return c;
}

Vector pre_pca_vector(const FeatureMap& map, const PipelineConfig& config,
                      const Embedder* embedder) {
  Vector pooled;
  switch (config.aggregation) {
    case Aggregation::Sum:
      pooled = sum_pool(map, config.center_prior);
      break;
    case Aggregation::Max:
      pooled = max_pool(map);
      break;
    case Aggregation::Fisher:
    case Aggregation::Vlad:
    case Aggregation::Triang:
      if (embedder == nullptr) {
        fail(ErrorCode::InvalidArgument, "aggregation '" + std::string(to_string(config.aggregation)) +
                                             "' needs a fitted embedder");
      }
      pooled = aggregate_embedded(map, *embedder);
      break;
  }
  if (config.power_alpha) pooled = power_normalize(pooled, *config.power_alpha);
  return l2_normalize(pooled);
}

Vector spoc_descriptor(const FeatureMap& map, const PcaWhiteningModel& model,
                       const PipelineConfig& config) {
  if (config.aggregation != Aggregation::Sum) {
    fail(ErrorCode::InvalidArgument, "SPoC descriptors use sum pooling");
  }
  return l2_normalize(apply_pca(model, l2_normalize(sum_pool(map, config.center_prior))));
}

Vector spoc_descriptor(const FeatureMap& map, const WeightGrid& weights,
                       const PcaWhiteningModel& model) {
  return l2_normalize(apply_pca(model, l2_normalize(sum_pool(map, weights))));
}

Vector competitor_descriptor(const FeatureMap& map, const DescriptorModels& models,
                             const PipelineConfig& config) {
  const Embedder* embedder = models.embedder ? &*models.embedder : nullptr;
  return l2_normalize(apply_pca(models.pca, pre_pca_vector(map, config, embedder)));
}

Vector compute_descriptor(const FeatureMap& map, const DescriptorModels& models,
                          const PipelineConfig& config) {
  if (config.aggregation == Aggregation::Sum) return spoc_descriptor(map, models.pca, config);
  return competitor_descriptor(map, models, config);
}

DescriptorModels fit_descriptor_models(const std::vector<FeatureMap>& holdout,
                                       const PipelineConfig& config, std::uint64_t seed,
                                       std::size_t max_local_features,
                                       FitDiagnostics* diagnostics) {
  if (holdout.empty()) fail(ErrorCode::InsufficientData, "no hold-out feature maps");
  DescriptorModels models;
  FitDiagnostics diag;

  if (config.aggregation == Aggregation::Fisher || config.aggregation == Aggregation::Vlad ||
      config.aggregation == Aggregation::Triang) {
    const Matrix local = collect_local_features(holdout, max_local_features, seed);
    diag.local_features = static_cast<std::size_t>(local.rows());
    switch (config.aggregation) {
      case Aggregation::Fisher:
        models.embedder = fit_fisher(local, config.codebook_size, seed,
                                     {config.fisher_feature_dims}, &diag.em_log_likelihood);
        break;
      case Aggregation::Vlad:
        models.embedder = fit_vlad(local, config.codebook_size, seed);
        break;
      default:
        models.embedder = fit_triang(local, config.codebook_size, seed, config.triang);
        break;
    }
  }

  const Embedder* embedder = models.embedder ? &*models.embedder : nullptr;
  std::vector<Vector> rows(holdout.size());
  std::vector<std::exception_ptr> errors(holdout.size());
  const auto n = static_cast<std::ptrdiff_t>(holdout.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      rows[i] = pre_pca_vector(holdout[i], config, embedder);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  const Matrix samples = stack_rows(rows);
  if (config.dims > samples.cols()) {
    fail(ErrorCode::InvalidArgument, "target dimension " + std::to_string(config.dims) +
                                         " exceeds aggregated dimension " +
                                         std::to_string(samples.cols()));
  }
  models.pca = fit_pca(samples, config.dims, config.whiten, config.center_pca);
  diag.explained_variance = models.pca.explained_variance;
  if (diagnostics) *diagnostics = std::move(diag);
  return models;
}

}  // namespace spoc
