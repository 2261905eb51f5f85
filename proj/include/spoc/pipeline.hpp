#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spoc/aggregate.hpp"
#include "spoc/embed.hpp"
#include "spoc/feature_store.hpp"
#include "spoc/postprocess.hpp"

namespace spoc {

enum class Aggregation { Sum, Max, Fisher, Vlad, Triang };

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view name);

/// End-to-end descriptor recipe. Defaults follow the method: sum pooling is
/// whitened, max pooling is not, embedding methods are power-normalized and
/// not whitened.
struct PipelineConfig {
  Aggregation aggregation = Aggregation::Sum;
  CenterPriorConfig center_prior = CenterPriorConfig::third_of_center_to_boundary();
  Eigen::Index dims = 256;
  bool whiten = true;
  std::optional<double> power_alpha;
  bool center_pca = true;

  // Embedding parameters (ignored for sum/max).
  Eigen::Index codebook_size = 16;
  Eigen::Index fisher_feature_dims = 32;
  TriangOptions triang;

  static PipelineConfig for_method(std::string_view method);
};

/// Fitted state needed to turn a feature map into a final descriptor.
struct DescriptorModels {
  std::optional<Embedder> embedder;
  PcaWhiteningModel pca;
};

/// Aggregation, optional power normalization and l2 normalization: the
/// vector the final PCA is fitted on and applied to.
Vector pre_pca_vector(const FeatureMap& map, const PipelineConfig& config,
                      const Embedder* embedder);

/// sum_pool -> l2 -> PCA(+whitening) -> l2. Requires sum aggregation.
Vector spoc_descriptor(const FeatureMap& map, const PcaWhiteningModel& model,
                       const PipelineConfig& config);
/// Same chain with caller-supplied pooling weights.
Vector spoc_descriptor(const FeatureMap& map, const WeightGrid& weights,
                       const PcaWhiteningModel& model);

/// max: max_pool -> l2 -> PCA -> l2.
/// fv / vlad / temb: aggregate_embedded -> power -> l2 -> PCA -> l2.
Vector competitor_descriptor(const FeatureMap& map, const DescriptorModels& models,
                             const PipelineConfig& config);

/// Dispatches to spoc_descriptor or competitor_descriptor.
Vector compute_descriptor(const FeatureMap& map, const DescriptorModels& models,
                          const PipelineConfig& config);

struct FitDiagnostics {
  double explained_variance = 0.0;
  std::vector<double> em_log_likelihood;
  std::size_t local_features = 0;
};

/// Learns the embedder (on up to `max_local_features` sampled local
/// features) and then the final PCA on hold-out maps.
DescriptorModels fit_descriptor_models(const std::vector<FeatureMap>& holdout,
                                       const PipelineConfig& config, std::uint64_t seed,
                                       std::size_t max_local_features,
                                       FitDiagnostics* diagnostics = nullptr);

}  // namespace spoc
