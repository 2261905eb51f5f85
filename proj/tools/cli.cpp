#include "cli.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "spoc/binary_io.hpp"
#include "spoc/error.hpp"
#include "spoc/evaluation.hpp"
#include "spoc/model_io.hpp"
#include "spoc/pipeline.hpp"
#include "spoc/retrieval.hpp"
#include "spoc/synthetic.hpp"
#include "spoc/text.hpp"

namespace spoc::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kFitFile = "fit.json";
constexpr const char* kPcaFile = "pca.model";
constexpr const char* kEmbedderFile = "embedder.model";

class Log {
 public:
  Log(std::ostream& err, const bool& quiet) : err_(err), quiet_(quiet) {}
  void info(const std::string& msg) const {
    if (!quiet_) err_ << "spoc: " << msg << '\n';
  }
  void warn(const std::string& msg) const { err_ << "spoc: warning: " << msg << '\n'; }
  void error(const std::string& msg) const { err_ << "spoc: error: " << msg << '\n'; }

 private:
  std::ostream& err_;
  const bool& quiet_;
};

// Files written by the running command; removed again if it fails.
class Outputs {
 public:
  void write(const fs::path& path, std::string_view bytes) {
    io::write_file_atomic(path, bytes);
    written_.push_back(path);
  }
  void track(const fs::path& path) { written_.push_back(path); }
  void discard() {
    std::error_code ec;
    for (auto it = written_.rbegin(); it != written_.rend(); ++it) fs::remove(*it, ec);
    written_.clear();
  }

 private:
  std::vector<fs::path> written_;
};

int exit_code(ErrorCode code) {
  if (code == ErrorCode::InvalidArgument) return kUsage;
  return is_numeric(code) ? kNumericFailure : kDataError;
}

// Effective values of every option of a (sub)command, after flags, config
// file and defaults have been merged.
json effective_options(const CLI::App& app) {
  json opts = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      opts[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      opts[name] = opt->get_default_str();
    }
  }
  return opts;
}

void write_sidecar(Outputs& outputs, const fs::path& primary, const std::string& command,
                   const CLI::App& app) {
  const json doc = {{"command", command}, {"options", effective_options(app)}};
  outputs.write(fs::path(primary.string() + ".config.json"), doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Model directory

json config_to_json(const std::string& method, const PipelineConfig& c) {
  json prior = {{"enabled", c.center_prior.enabled}, {"sigma", nullptr}};
  if (c.center_prior.sigma) prior["sigma"] = *c.center_prior.sigma;
  return {{"method", method},
          {"aggregation", std::string(to_string(c.aggregation))},
          {"center_prior", prior},
          {"dims", c.dims},
          {"whiten", c.whiten},
          {"power_alpha", c.power_alpha ? json(*c.power_alpha) : json(nullptr)},
          {"center_pca", c.center_pca},
          {"codebook_size", c.codebook_size},
          {"fisher_feature_dims", c.fisher_feature_dims},
          {"temb_sqrt", c.triang.sqrt_features},
          {"temb_drop", c.triang.drop_components}};
}

PipelineConfig config_from_json(const json& j) {
  try {
    PipelineConfig c;
    c.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
    const auto& prior = j.at("center_prior");
    c.center_prior.enabled = prior.at("enabled").get<bool>();
    if (!prior.at("sigma").is_null()) c.center_prior.sigma = prior.at("sigma").get<double>();
    c.dims = j.at("dims").get<Eigen::Index>();
    c.whiten = j.at("whiten").get<bool>();
    if (!j.at("power_alpha").is_null()) c.power_alpha = j.at("power_alpha").get<double>();
    c.center_pca = j.at("center_pca").get<bool>();
    c.codebook_size = j.at("codebook_size").get<Eigen::Index>();
    c.fisher_feature_dims = j.at("fisher_feature_dims").get<Eigen::Index>();
    c.triang.sqrt_features = j.at("temb_sqrt").get<bool>();
    c.triang.drop_components = j.at("temb_drop").get<Eigen::Index>();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedHeader, std::string("fit.json: ") + e.what());
  }
}

bool needs_embedder(Aggregation a) {
  return a == Aggregation::Fisher || a == Aggregation::Vlad || a == Aggregation::Triang;
}

struct LoadedModels {
  PipelineConfig config;
  DescriptorModels models;
};

LoadedModels load_models(const fs::path& dir) {
  json fit;
  try {
    fit = json::parse(io::read_file(dir / kFitFile));
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedHeader, std::string("fit.json: ") + e.what());
  }
  if (!fit.contains("config")) fail(ErrorCode::MalformedHeader, "fit.json lacks 'config'");
  LoadedModels out;
  out.config = config_from_json(fit["config"]);
  out.models.pca = read_pca_model(dir / kPcaFile);
  if (needs_embedder(out.config.aggregation)) {
    out.models.embedder = read_embedder_model(dir / kEmbedderFile);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared pieces

struct CropOptions {
  std::optional<QueryBox> box;
  bool full_prior = false;
};

Vector query_descriptor(const FeatureMap& map, const LoadedModels& m, const CropOptions& crop) {
  if (!crop.box) return compute_descriptor(map, m.models, m.config);
  const auto cropped = crop_filter_features(map, *crop.box);
  if (m.config.aggregation != Aggregation::Sum) {
    return compute_descriptor(cropped.map, m.models, m.config);
  }
  const auto weights =
      crop.full_prior
          ? crop_weights(gaussian_weights(map.height(), map.width(), m.config.center_prior), cropped)
          : gaussian_weights(cropped.map.height(), cropped.map.width(), m.config.center_prior);
  return spoc_descriptor(cropped.map, weights, m.models.pca);
}

std::vector<Vector> descriptors_for(const std::vector<FeatureMap>& maps, const LoadedModels& m) {
  std::vector<Vector> out(maps.size());
  std::vector<std::exception_ptr> errors(maps.size());
  const auto n = static_cast<std::ptrdiff_t>(maps.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = compute_descriptor(maps[i], m.models, m.config);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      const std::string what = e.what();
      fail(e.code(), maps[i].image_id() + ": " + what.substr(what.find(": ") + 2));
    }
  }
  return out;
}

Vector index_row(const DescriptorIndex& index, std::size_t pos) {
  const auto row = index.row(pos);
  return to_vector(row);
}

std::string csv_line(std::initializer_list<std::string> fields) {
  std::string line;
  for (const auto& f : fields) {
    if (!line.empty()) line += ',';
    line += f;
  }
  return line + '\n';
}

// ---------------------------------------------------------------------------
// Commands

struct SynthArgs {
  fs::path out;
  std::uint32_t scenes = 10;
  std::uint32_t per_scene = 5;
  std::uint32_t holdout = 40;
  std::uint32_t channels = 32;
  std::uint32_t height = 12;
  std::uint32_t width = 12;
  std::uint64_t seed = 0;
  bool include_self = false;
  bool boxes = false;
};

void cmd_synth(const SynthArgs& a, const CLI::App& app, Outputs& outputs, const Log& log) {
  synthetic::SceneCorpusConfig cfg;
  cfg.scenes = a.scenes;
  cfg.images_per_scene = a.per_scene;
  cfg.holdout_images = a.holdout;
  cfg.channels = a.channels;
  cfg.height = a.height;
  cfg.width = a.width;
  cfg.seed = a.seed;
  cfg.include_self = a.include_self;
  auto corpus = synthetic::make_scene_corpus(cfg);

  fs::create_directories(a.out / "features");
  auto emit = [&](const std::vector<FeatureMap>& maps, const char* manifest) {
    std::vector<ManifestEntry> entries;
    for (const auto& m : maps) {
      const fs::path rel = fs::path("features") / (m.image_id() + ".feat");
      outputs.write(a.out / rel, encode_feature_file(m));
      entries.push_back({m.image_id(), rel});
    }
    outputs.track(a.out / manifest);
    write_manifest(entries, a.out / manifest);
  };
  emit(corpus.images, "manifest.json");
  emit(corpus.holdout, "holdout.json");

  if (a.boxes) {
    // central half of the input image
    const auto g = stride16_geometry(a.height, a.width);
    const QueryBox box{g.input_width / 4, g.input_height / 4, 3 * std::int64_t{g.input_width} / 4 - 1,
                       3 * std::int64_t{g.input_height} / 4 - 1};
    for (auto& [id, t] : corpus.truth) t.box = box;
  }
  outputs.write(a.out / "truth.json", encode_ground_truth(corpus.truth));
  write_sidecar(outputs, a.out / "synth", "synth", app);
  log.info("wrote " + std::to_string(corpus.images.size()) + " images and " +
           std::to_string(corpus.holdout.size()) + " hold-out images to " + a.out.string());
}

struct FitArgs {
  fs::path holdout_manifest;
  std::optional<fs::path> manifest;
  std::string method = "spoc";
  Eigen::Index dim = 256;
  std::optional<double> sigma;
  std::optional<double> alpha;
  std::optional<bool> whiten;
  bool no_center_pca = false;
  std::optional<Eigen::Index> codebook;
  Eigen::Index fv_dims = 32;
  bool temb_sqrt = false;
  Eigen::Index temb_drop = 0;
  std::size_t max_local = 100000;
  std::uint64_t seed = 0;
  fs::path out;
};

void cmd_fit(const FitArgs& a, const CLI::App& app, Outputs& outputs, std::ostream& out,
             const Log& log) {
  auto config = PipelineConfig::for_method(a.method);
  config.dims = a.dim;
  if (a.sigma) {
    if (config.aggregation != Aggregation::Sum) {
      log.warn("--sigma only affects sum pooling; ignored for method " + a.method);
    } else if (!config.center_prior.enabled) {
      log.warn("--sigma ignored: method " + a.method + " has no center prior");
    } else {
      config.center_prior = CenterPriorConfig::with_sigma(*a.sigma);
      prior_sigma(1, 1, config.center_prior);  // validates
    }
  }
  if (a.alpha) config.power_alpha = *a.alpha;
  if (a.whiten) config.whiten = *a.whiten;
  config.center_pca = !a.no_center_pca;
  if (a.codebook) config.codebook_size = *a.codebook;
  config.fisher_feature_dims = a.fv_dims;
  config.triang.sqrt_features = a.temb_sqrt;
  config.triang.drop_components = a.temb_drop;

  const auto holdout_entries = read_manifest(a.holdout_manifest);
  if (a.manifest) {
    std::set<std::string> eval_ids;
    std::set<fs::path> eval_paths;
    for (const auto& e : read_manifest(*a.manifest)) {
      eval_ids.insert(e.image_id);
      eval_paths.insert(fs::weakly_canonical(e.path));
    }
    std::size_t overlap = 0;
    for (const auto& e : holdout_entries) {
      if (eval_ids.count(e.image_id) || eval_paths.count(fs::weakly_canonical(e.path))) ++overlap;
    }
    if (overlap > 0) {
      log.warn(std::to_string(overlap) +
               " hold-out images also appear in the evaluation manifest; learned parameters "
               "will be biased");
    }
  }
  const auto holdout = load_manifest_maps(holdout_entries);
  log.info("fitting " + a.method + " on " + std::to_string(holdout.size()) + " hold-out images");

  FitDiagnostics diag;
  const auto models = fit_descriptor_models(holdout, config, a.seed, a.max_local, &diag);
  const double ortho = orthonormality_error(models.pca.components);
  if (ortho > 1e-8) fail(ErrorCode::NumericFailure, "PCA rows are not orthonormal");

  fs::create_directories(a.out);
  outputs.write(a.out / kPcaFile, encode_model(pca_to_model(models.pca)));
  if (models.embedder) {
    outputs.write(a.out / kEmbedderFile, encode_model(embedder_to_model(*models.embedder, a.seed)));
  }
  json em = json::array();
  for (double v : diag.em_log_likelihood) em.push_back(v);
  const json fit = {
      {"config", config_to_json(a.method, config)},
      {"seed", a.seed},
      {"holdout_images", holdout.size()},
      {"diagnostics",
       {{"explained_variance", diag.explained_variance},
        {"orthonormality_error", ortho},
        {"em_log_likelihood", em},
        {"local_features", diag.local_features}}},
  };
  outputs.write(a.out / kFitFile, fit.dump(2) + "\n");
  write_sidecar(outputs, a.out / kFitFile, "fit", app);

  out << "explained_variance," << format_number(diag.explained_variance) << '\n';
  if (!diag.em_log_likelihood.empty()) {
    out << "em_iterations," << diag.em_log_likelihood.size() - 1 << '\n';
    out << "em_log_likelihood," << format_number(diag.em_log_likelihood.back()) << '\n';
  }
}

struct AggregateArgs {
  fs::path manifest;
  fs::path models;
  fs::path out;
};

void cmd_aggregate(const AggregateArgs& a, const CLI::App& app, Outputs& outputs, const Log& log) {
  const auto m = load_models(a.models);
  const auto maps = load_manifest_maps(read_manifest(a.manifest));
  const auto descriptors = descriptors_for(maps, m);
  std::vector<std::pair<std::string, Vector>> rows;
  rows.reserve(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) rows.push_back({maps[i].image_id(), descriptors[i]});
  outputs.write(a.out, encode_index(build_index(rows)));
  write_sidecar(outputs, a.out, "aggregate", app);
  log.info("aggregated " + std::to_string(rows.size()) + " descriptors into " + a.out.string());
}

struct IndexArgs {
  std::vector<fs::path> descriptors;
  fs::path out;
};

void cmd_index(const IndexArgs& a, const CLI::App& app, Outputs& outputs, const Log& log) {
  std::vector<std::pair<std::string, Vector>> rows;
  for (const auto& path : a.descriptors) {
    const auto part = read_index(path);
    for (std::size_t i = 0; i < part.size(); ++i) rows.push_back({part.ids()[i], index_row(part, i)});
  }
  const auto index = build_index(rows);
  outputs.write(a.out, encode_index(index));
  write_sidecar(outputs, a.out, "index", app);
  log.info("indexed " + std::to_string(index.size()) + " descriptors of dimension " +
           std::to_string(index.dim()));
}

struct QueryArgs {
  fs::path index;
  fs::path models;
  fs::path feature;
  std::size_t k = 10;
  std::optional<std::string> crop;
  bool crop_full_prior = false;
  std::optional<fs::path> out;
};

void cmd_query(const QueryArgs& a, const CLI::App& app, Outputs& outputs, std::ostream& out,
               const Log& log) {
  const auto index = read_index(a.index);
  const auto m = load_models(a.models);
  const auto map = read_feature_file(a.feature);
  CropOptions crop{a.crop ? std::optional(parse_query_box(*a.crop)) : std::nullopt, a.crop_full_prior};
  const auto q = query_descriptor(map, m, crop);
  if (a.k > index.size()) {
    log.warn("k=" + std::to_string(a.k) + " exceeds index size " + std::to_string(index.size()));
  }
  std::string text;
  for (const auto& hit : search(index, q, std::min(a.k, index.size()))) {
    text += csv_line({hit.id, format_number(hit.similarity)});
  }
  if (a.out) {
    outputs.write(*a.out, text);
    write_sidecar(outputs, *a.out, "query", app);
  }
  out << text;
}

struct EvaluateArgs {
  fs::path index;
  fs::path truth;
  std::optional<fs::path> out;
  std::optional<bool> include_self;
  std::optional<fs::path> manifest;
  std::optional<fs::path> models;
  bool crop_full_prior = false;
};

void cmd_evaluate(const EvaluateArgs& a, bool ukb, const CLI::App& app, Outputs& outputs,
                  std::ostream& out, const Log& log) {
  const auto index = read_index(a.index);
  const auto truth = read_ground_truth(a.truth);
  const bool include_self = a.include_self.value_or(ukb);
  const bool any_box = std::any_of(truth.begin(), truth.end(),
                                   [](const auto& kv) { return kv.second.box.has_value(); });
  if (a.manifest.has_value() != a.models.has_value()) {
    fail(ErrorCode::InvalidArgument, "--manifest and --models must be given together");
  }

  std::map<std::string, FeatureMap> query_maps;
  std::optional<LoadedModels> m;
  if (a.manifest) {
    m = load_models(*a.models);
    std::vector<ManifestEntry> wanted;
    for (const auto& e : read_manifest(*a.manifest)) {
      if (truth.count(e.image_id)) wanted.push_back(e);
    }
    for (auto& map : load_manifest_maps(wanted)) query_maps.emplace(map.image_id(), std::move(map));
  } else if (any_box) {
    fail(ErrorCode::InvalidArgument,
         "ground truth has query boxes; pass --manifest and --models to crop queries");
  }

  std::string csv = ukb ? "query,score\n" : "query,ap\n";
  Rankings rankings;
  for (const auto& [query, entry] : truth) {
    Vector q;
    if (m) {
      auto it = query_maps.find(query);
      if (it == query_maps.end()) fail(ErrorCode::MissingTruth, "query '" + query + "' not in manifest");
      q = query_descriptor(it->second, *m, {entry.box, a.crop_full_prior});
    } else {
      const auto pos = index.find(query);
      if (pos == index.size()) fail(ErrorCode::MissingTruth, "query '" + query + "' not in index");
      q = index_row(index, pos);
    }
    auto ranking = rank_all(index, q, query, include_self);
    const double score = ukb ? ukb_query_score(ranking, entry) : average_precision(ranking, entry);
    csv += csv_line({query, format_number(score)});
    rankings.emplace(query, std::move(ranking));
  }
  const double mean = ukb ? ukb_score(rankings, truth) : mean_average_precision(rankings, truth);
  if (a.out) {
    outputs.write(*a.out, csv);
    write_sidecar(outputs, *a.out, ukb ? "evaluate ukb" : "evaluate map", app);
  }
  log.info(std::to_string(rankings.size()) + " queries, self matches " +
           (include_self ? "included" : "excluded"));
  out << (ukb ? "ukb," : "map,") << format_number(mean) << '\n';
}

struct RatioArgs {
  fs::path manifest;
  std::optional<std::string> query_id;
  std::size_t queries = 10;
  std::size_t k_max = 100;
  std::size_t max_reference = 0;
  std::uint64_t seed = 0;
  fs::path out;
};

void cmd_ratio_curve(const RatioArgs& a, const CLI::App& app, Outputs& outputs, const Log& log) {
  const auto maps = load_manifest_maps(read_manifest(a.manifest));
  if (maps.size() < 2) fail(ErrorCode::InsufficientData, "ratio curve needs at least two images");
  std::size_t qi = 0;
  if (a.query_id) {
    auto it = std::find_if(maps.begin(), maps.end(),
                           [&](const FeatureMap& m) { return m.image_id() == *a.query_id; });
    if (it == maps.end()) fail(ErrorCode::MissingTruth, "image '" + *a.query_id + "' not in manifest");
    qi = static_cast<std::size_t>(it - maps.begin());
  }
  // every feature, strongest first
  auto ranked = select_top_norm_features(maps[qi], 1.0);
  if (a.queries < 1) fail(ErrorCode::InvalidArgument, "--queries must be positive");
  ranked.resize(std::min(a.queries, ranked.size()));
  Matrix queries(static_cast<Eigen::Index>(ranked.size()), maps[qi].channels());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    queries.row(static_cast<Eigen::Index>(i)) =
        to_vector(std::span<const float>(ranked[i].vector)).transpose();
  }
  std::vector<FeatureMap> others;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (i != qi) others.push_back(maps[i]);
  }
  const Matrix reference = collect_local_features(others, a.max_reference, a.seed);
  log.info(std::to_string(queries.rows()) + " query features against " +
           std::to_string(reference.rows()) + " reference features");
  const auto curve = distance_ratio_curve(queries, reference, a.k_max);
  std::string csv = "k,ratio\n";
  for (std::size_t k = 0; k < curve.ratios.size(); ++k) {
    csv += csv_line({std::to_string(k + 1), format_number(curve.ratios[k])});
  }
  outputs.write(a.out, csv);
  write_sidecar(outputs, a.out, "analyze ratio-curve", app);
}

struct HeatmapArgs {
  fs::path models;
  fs::path index;
  fs::path feature;
  std::string target_id;
  fs::path out;
};

void cmd_heatmap(const HeatmapArgs& a, const CLI::App& app, Outputs& outputs) {
  const auto m = load_models(a.models);
  if (m.config.aggregation != Aggregation::Sum) {
    fail(ErrorCode::InvalidArgument, "heatmaps need a sum-pooling model (PCA over raw features)");
  }
  const auto index = read_index(a.index);
  const auto pos = index.find(a.target_id);
  if (pos == index.size()) fail(ErrorCode::MissingTruth, "target '" + a.target_id + "' not in index");
  const auto map = read_feature_file(a.feature);
  outputs.write(a.out, heatmap_csv(similarity_heatmap(map, m.models.pca, index_row(index, pos))));
  write_sidecar(outputs, a.out, "analyze heatmap", app);
}

struct NormArgs {
  fs::path manifest;
  fs::path truth;
  double fraction = 0.01;
  std::uint64_t seed = 0;
  fs::path out;
};

void cmd_norm_subsample(const NormArgs& a, const CLI::App& app, Outputs& outputs,
                        std::ostream& out) {
  const auto maps = load_manifest_maps(read_manifest(a.manifest));
  const auto truth = read_ground_truth(a.truth);
  const double top = subsample_retrieval_map(maps, truth, a.fraction, FeatureSelection::TopNorm, a.seed);
  const double rnd = subsample_retrieval_map(maps, truth, a.fraction, FeatureSelection::Random, a.seed);
  const std::string csv = "selection,fraction,map\n" +
                          csv_line({"top_norm", format_number(a.fraction), format_number(top)}) +
                          csv_line({"random", format_number(a.fraction), format_number(rnd)});
  outputs.write(a.out, csv);
  write_sidecar(outputs, a.out, "analyze norm-subsample", app);
  out << csv;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Global image descriptors from convolutional feature maps", "spoc"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML/INI file with option values (command-line flags win)");
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  int threads = 0;
  app.add_flag("-q,--quiet", quiet, "Only warnings and errors on stderr");
  app.add_option("--threads", threads, "OpenMP threads (0 keeps the runtime default)")
      ->check(CLI::NonNegativeNumber);
  const Log log(err, quiet);
  Outputs outputs;
  std::function<void()> action;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a seeded synthetic corpus (features, manifests, truth)");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Random seed")->required();
  s->add_option("--scenes", synth.scenes, "Number of scenes")->check(CLI::PositiveNumber);
  s->add_option("--per-scene", synth.per_scene, "Images per scene")->check(CLI::PositiveNumber);
  s->add_option("--holdout", synth.holdout, "Hold-out images from unrelated scenes");
  s->add_option("--channels", synth.channels, "Channels C")->check(CLI::PositiveNumber);
  s->add_option("--height", synth.height, "Map height H")->check(CLI::PositiveNumber);
  s->add_option("--width", synth.width, "Map width W")->check(CLI::PositiveNumber);
  s->add_flag("--include-self", synth.include_self, "List each query among its own relevant images");
  s->add_flag("--boxes", synth.boxes, "Give every query a central crop box");
  s->callback([&] { action = [&] { cmd_synth(synth, *s, outputs, log); }; });

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Learn PCA (and codebooks) on a hold-out manifest");
  f->add_option("--holdout-manifest", fit.holdout_manifest, "Hold-out manifest")->required();
  f->add_option("--manifest", fit.manifest, "Evaluation manifest, checked for overlap");
  f->add_option("--method", fit.method, "Descriptor method")
      ->check(CLI::IsMember({"spoc", "spoc-nocenter", "max", "fv", "vlad", "temb"}));
  f->add_option("--dim", fit.dim, "Output dimension N")->check(CLI::PositiveNumber);
  f->add_option("--sigma", fit.sigma, "Center prior width in cells (default min(H,W)/6)")
      ->check(CLI::PositiveNumber);
  f->add_option("--alpha", fit.alpha, "Power normalization exponent in (0,1]")
      ->check(CLI::Range(0.0, 1.0));
  f->add_flag("--whiten,!--no-whiten", fit.whiten, "Override the method's whitening default");
  f->add_flag("--no-center-pca", fit.no_center_pca, "Apply PCA without subtracting the mean");
  f->add_option("--codebook-size", fit.codebook, "K for fv/vlad/temb")->check(CLI::PositiveNumber);
  f->add_option("--fv-dims", fit.fv_dims, "PCA size of local features before the GMM")
      ->check(CLI::PositiveNumber);
  f->add_flag("--temb-sqrt", fit.temb_sqrt, "Signed square root of features before T-emb");
  f->add_option("--temb-drop", fit.temb_drop, "Leading whitened T-emb components to drop")
      ->check(CLI::NonNegativeNumber);
  f->add_option("--max-local-features", fit.max_local, "Local features sampled for codebooks (0 = all)");
  f->add_option("--seed", fit.seed, "Random seed")->required();
  f->add_option("--out", fit.out, "Model directory")->required();
  f->callback([&] { action = [&] { cmd_fit(fit, *f, outputs, out, log); }; });

  AggregateArgs agg;
  auto* g = app.add_subcommand("aggregate", "Compute descriptors for every image in a manifest");
  g->add_option("--manifest", agg.manifest, "Feature manifest")->required();
  g->add_option("--models", agg.models, "Model directory from 'fit'")->required();
  g->add_option("--out", agg.out, "Descriptor file")->required();
  g->callback([&] { action = [&] { cmd_aggregate(agg, *g, outputs, log); }; });

  IndexArgs idx;
  auto* i = app.add_subcommand("index", "Validate and merge descriptor files into an index");
  i->add_option("--descriptors", idx.descriptors, "Descriptor files")->required();
  i->add_option("--out", idx.out, "Index file")->required();
  i->callback([&] { action = [&] { cmd_index(idx, *i, outputs, log); }; });

  QueryArgs qa;
  auto* q = app.add_subcommand("query", "Rank the index against one query feature file");
  q->add_option("--index", qa.index, "Index file")->required();
  q->add_option("--models", qa.models, "Model directory from 'fit'")->required();
  q->add_option("--feature", qa.feature, "Query feature file")->required();
  q->add_option("--k", qa.k, "Results to print")->check(CLI::PositiveNumber);
  q->add_option("--crop", qa.crop, "Query box x0,y0,x1,y1 in input pixels");
  q->add_flag("--crop-full-prior", qa.crop_full_prior, "Keep full-image prior weights inside the crop");
  q->add_option("--out", qa.out, "Also write results to this file");
  q->callback([&] { action = [&] { cmd_query(qa, *q, outputs, out, log); }; });

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score rankings against ground truth");
  e->require_subcommand(1);
  for (const auto* kind : {"map", "ukb"}) {
    auto* sub = e->add_subcommand(kind, std::string(kind) == "map" ? "Mean average precision"
                                                                   : "Mean same-object count in the top four");
    sub->add_option("--index", ev.index, "Index file")->required();
    sub->add_option("--truth", ev.truth, "Ground truth JSON")->required();
    sub->add_option("--out", ev.out, "Per-query CSV");
    sub->add_flag("--include-self,!--exclude-self", ev.include_self,
                  "Count the query's own image (default: excluded for map, included for ukb)");
    sub->add_option("--manifest", ev.manifest, "Feature manifest, to recompute (cropped) queries");
    sub->add_option("--models", ev.models, "Model directory, with --manifest");
    sub->add_flag("--crop-full-prior", ev.crop_full_prior, "Keep full-image prior weights inside crops");
    const bool ukb = std::string(kind) == "ukb";
    sub->callback([&, sub, ukb] { action = [&, sub, ukb] { cmd_evaluate(ev, ukb, *sub, outputs, out, log); }; });
  }

  auto* an = app.add_subcommand("analyze", "Emit analysis data as CSV");
  an->require_subcommand(1);
  RatioArgs ra;
  auto* rc = an->add_subcommand("ratio-curve", "Distance to the k-th neighbor over the median distance");
  rc->add_option("--manifest", ra.manifest, "Feature manifest")->required();
  rc->add_option("--query-id", ra.query_id, "Image supplying query features (default: first)");
  rc->add_option("--queries", ra.queries, "Highest-norm features used as queries");
  rc->add_option("--k-max", ra.k_max, "Largest neighbor index")->check(CLI::PositiveNumber);
  rc->add_option("--max-reference", ra.max_reference, "Reference features sampled (0 = all)");
  rc->add_option("--seed", ra.seed, "Seed for reference sampling");
  rc->add_option("--out", ra.out, "CSV file")->required();
  rc->callback([&] { action = [&] { cmd_ratio_curve(ra, *rc, outputs, log); }; });

  HeatmapArgs ha;
  auto* hm = an->add_subcommand("heatmap", "Per-cell cosine similarity to an indexed descriptor");
  hm->add_option("--models", ha.models, "Model directory from 'fit'")->required();
  hm->add_option("--index", ha.index, "Index file")->required();
  hm->add_option("--feature", ha.feature, "Query feature file")->required();
  hm->add_option("--target-id", ha.target_id, "Indexed image to compare against")->required();
  hm->add_option("--out", ha.out, "CSV file (H rows, W columns)")->required();
  hm->callback([&] { action = [&] { cmd_heatmap(ha, *hm, outputs); }; });

  NormArgs na;
  auto* ns = an->add_subcommand("norm-subsample", "mAP using only a fraction of features per image");
  ns->add_option("--manifest", na.manifest, "Feature manifest")->required();
  ns->add_option("--truth", na.truth, "Ground truth JSON")->required();
  ns->add_option("--fraction", na.fraction, "Fraction of cells kept")->check(CLI::Range(0.0, 1.0));
  ns->add_option("--seed", na.seed, "Seed for random selection");
  ns->add_option("--out", na.out, "CSV file")->required();
  ns->callback([&] { action = [&] { cmd_norm_subsample(na, *ns, outputs, out); }; });

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
    app.parse(rest);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (threads > 0) omp_set_num_threads(threads);
  try {
    action();
    return kOk;
  } catch (const Error& ex) {
    outputs.discard();
    log.error(ex.what());
    return exit_code(ex.code());
  } catch (const fs::filesystem_error& ex) {
    outputs.discard();
    log.error(ex.what());
    return kDataError;
  } catch (const std::exception& ex) {
    outputs.discard();
    log.error(ex.what());
    return kNumericFailure;
  }
}

}  // namespace spoc::cli
