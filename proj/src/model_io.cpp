#include "spoc/model_io.hpp"

#include "spoc/binary_io.hpp"
#include "spoc/error.hpp"

namespace spoc {
namespace {

constexpr std::string_view kModelMagic = "SPOCMODL";
constexpr std::uint32_t kModelVersion = 1;

Matrix row_matrix(const Vector& v) { return Matrix(v.transpose()); }
Vector as_vector(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

void add_pca(ModelFile& file, const std::string& prefix, const PcaWhiteningModel& pca) {
  file.arrays.emplace_back(prefix + "mean", row_matrix(pca.mean));
  file.arrays.emplace_back(prefix + "components", pca.components);
  file.arrays.emplace_back(prefix + "singulars", row_matrix(pca.singulars));
}

PcaWhiteningModel get_pca(const ModelFile& file, const std::string& prefix, bool whiten,
                          bool center) {
  PcaWhiteningModel pca;
  pca.mean = as_vector(file.array(prefix + "mean"));
  pca.components = file.array(prefix + "components");
  pca.singulars = as_vector(file.array(prefix + "singulars"));
  pca.whiten = whiten;
  pca.center = center;
  if (pca.mean.size() != pca.components.cols() || pca.singulars.size() != pca.components.rows()) {
    fail(ErrorCode::ShapeMismatch, "inconsistent PCA arrays in model file");
  }
  return pca;
}

nlohmann::json base_header(std::string_view type) {
  return {{"format", "spoc-model"}, {"version", kModelVersion}, {"type", type}};
}

template <typename T>
T header_value(const nlohmann::json& header, const char* key) {
  if (!header.contains(key)) {
    fail(ErrorCode::MalformedHeader, std::string("model header lacks '") + key + "'");
  }
  try {
    return header.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::MalformedHeader, std::string("model header field '") + key + "' has wrong type");
  }
}

ModelFile read_model(const std::filesystem::path& path) {
  return decode_model(io::read_file(path));
}

}  // namespace

const Matrix& ModelFile::array(const std::string& name) const {
  for (const auto& [n, m] : arrays) {
    if (n == name) return m;
  }
  fail(ErrorCode::MalformedHeader, "model file lacks array '" + name + "'");
}

std::string encode_model(const ModelFile& model) {
  nlohmann::json header = model.header;
  header["arrays"] = nlohmann::json::array();
  for (const auto& [name, m] : model.arrays) {
    header["arrays"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  }
  header["dtype"] = "float64";
  const std::string text = header.dump();

  io::ByteWriter w;
  w.put_bytes(kModelMagic);
  w.put_u32(kModelVersion);
  w.put_u32(static_cast<std::uint32_t>(text.size()));
  w.put_bytes(text);
  for (const auto& [name, m] : model.arrays) {
    for (Eigen::Index i = 0; i < m.size(); ++i) w.put_f64(m.data()[i]);
  }
  return w.bytes();
}

ModelFile decode_model(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (r.remaining() < kModelMagic.size() || r.take(kModelMagic.size()) != kModelMagic) {
    fail(ErrorCode::MalformedHeader, "missing SPOCMODL magic");
  }
  if (auto version = r.get_u32(); version != kModelVersion) {
    fail(ErrorCode::MalformedHeader, "unsupported model version " + std::to_string(version));
  }
  const auto len = r.get_u32();
  ModelFile file;
  try {
    file.header = nlohmann::json::parse(r.take(len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader, std::string("model header: ") + e.what());
  }
  if (!file.header.contains("arrays") || !file.header["arrays"].is_array()) {
    fail(ErrorCode::MalformedHeader, "model header lacks array table");
  }
  for (const auto& a : file.header["arrays"]) {
    const auto rows = header_value<Eigen::Index>(a, "rows");
    const auto cols = header_value<Eigen::Index>(a, "cols");
    if (rows < 0 || cols < 0 || static_cast<std::uint64_t>(rows * cols) * 8 > r.remaining()) {
      fail(ErrorCode::ShapeMismatch, "model payload shorter than declared arrays");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.get_f64();
    file.arrays.emplace_back(header_value<std::string>(a, "name"), std::move(m));
  }
  if (r.remaining() != 0) fail(ErrorCode::ShapeMismatch, "trailing bytes after model payload");
  file.header.erase("arrays");
  file.header.erase("dtype");
  return file;
}

ModelFile pca_to_model(const PcaWhiteningModel& model) {
  ModelFile file;
  file.header = base_header("pca");
  file.header["D"] = model.input_dim();
  file.header["N"] = model.output_dim();
  file.header["whiten"] = model.whiten;
  file.header["center"] = model.center;
  file.header["sign_convention"] = "largest_abs_entry_positive";
  file.header["explained_variance"] = model.explained_variance;
  add_pca(file, "", model);
  return file;
}

PcaWhiteningModel pca_from_model(const ModelFile& file) {
  if (header_value<std::string>(file.header, "type") != "pca") {
    fail(ErrorCode::MalformedHeader, "not a PCA model file");
  }
  auto pca = get_pca(file, "", header_value<bool>(file.header, "whiten"),
                     header_value<bool>(file.header, "center"));
  pca.explained_variance = header_value<double>(file.header, "explained_variance");
  if (pca.input_dim() != header_value<Eigen::Index>(file.header, "D") ||
      pca.output_dim() != header_value<Eigen::Index>(file.header, "N")) {
    fail(ErrorCode::ShapeMismatch, "PCA arrays disagree with header D/N");
  }
  return pca;
}

ModelFile embedder_to_model(const Embedder& embedder, std::uint64_t seed) {
  ModelFile file;
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, VladEmbedder>) {
          file.header = base_header("vlad");
          file.header["K"] = e.codebook.size();
          file.header["d"] = e.codebook.dim();
          file.arrays.emplace_back("centroids", e.codebook.centroids);
        } else if constexpr (std::is_same_v<T, FisherEmbedder>) {
          file.header = base_header("fv");
          file.header["K"] = e.gmm.size();
          file.header["d"] = e.gmm.dim();
          file.header["input_dim"] = e.feature_pca.input_dim();
          add_pca(file, "feature_pca.", e.feature_pca);
          file.arrays.emplace_back("gmm.weights", row_matrix(e.gmm.weights));
          file.arrays.emplace_back("gmm.means", e.gmm.means);
          file.arrays.emplace_back("gmm.variances", e.gmm.variances);
        } else {
          file.header = base_header("temb");
          file.header["K"] = e.codebook.size();
          file.header["d"] = e.codebook.dim();
          file.header["sqrt_features"] = e.options.sqrt_features;
          file.header["drop_components"] = e.options.drop_components;
          file.arrays.emplace_back("centroids", e.codebook.centroids);
          add_pca(file, "stats.", e.stats.whitening);
        }
      },
      embedder);
  file.header["seed"] = seed;
  return file;
}

Embedder embedder_from_model(const ModelFile& file) {
  const auto type = header_value<std::string>(file.header, "type");
  if (type == "vlad") {
    return VladEmbedder{KmeansCodebook{file.array("centroids"), 0}};
  }
  if (type == "fv") {
    FisherEmbedder fe;
    fe.feature_pca = get_pca(file, "feature_pca.", false, true);
    fe.gmm.weights = as_vector(file.array("gmm.weights"));
    fe.gmm.means = file.array("gmm.means");
    fe.gmm.variances = file.array("gmm.variances");
    if (fe.gmm.means.cols() != fe.feature_pca.output_dim() ||
        fe.gmm.variances.rows() != fe.gmm.means.rows() ||
        fe.gmm.weights.size() != fe.gmm.means.rows()) {
      fail(ErrorCode::ShapeMismatch, "inconsistent Fisher model arrays");
    }
    return fe;
  }
  if (type == "temb") {
    TriangEmbedder te;
    te.codebook = KmeansCodebook{file.array("centroids"), 0};
    te.stats.whitening = get_pca(file, "stats.", true, true);
    te.options.sqrt_features = header_value<bool>(file.header, "sqrt_features");
    te.options.drop_components = header_value<Eigen::Index>(file.header, "drop_components");
    return te;
  }
  fail(ErrorCode::MalformedHeader, "unknown embedder type '" + type + "'");
}

void write_pca_model(const PcaWhiteningModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_model(pca_to_model(model)));
}

PcaWhiteningModel read_pca_model(const std::filesystem::path& path) {
  return pca_from_model(read_model(path));
}

void write_embedder_model(const Embedder& embedder, std::uint64_t seed,
                          const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_model(embedder_to_model(embedder, seed)));
}

Embedder read_embedder_model(const std::filesystem::path& path) {
  return embedder_from_model(read_model(path));
}

}  // namespace spoc
