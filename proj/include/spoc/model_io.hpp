#pragma once

// Versioned model files: "SPOCMODL", u32 version, u32 header length, a JSON
// header, then each array listed in header["arrays"] as row-major
// little-endian float64.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "spoc/embed.hpp"
#include "spoc/postprocess.hpp"

namespace spoc {

struct ModelFile {
  nlohmann::json header;
  std::vector<std::pair<std::string, Matrix>> arrays;

  const Matrix& array(const std::string& name) const;
};

std::string encode_model(const ModelFile& model);
ModelFile decode_model(std::string_view bytes);

ModelFile pca_to_model(const PcaWhiteningModel& model);
PcaWhiteningModel pca_from_model(const ModelFile& file);

/// `seed` is recorded in the header for provenance.
ModelFile embedder_to_model(const Embedder& embedder, std::uint64_t seed);
Embedder embedder_from_model(const ModelFile& file);

void write_pca_model(const PcaWhiteningModel& model, const std::filesystem::path& path);
PcaWhiteningModel read_pca_model(const std::filesystem::path& path);
void write_embedder_model(const Embedder& embedder, std::uint64_t seed,
                          const std::filesystem::path& path);
Embedder read_embedder_model(const std::filesystem::path& path);

}  // namespace spoc
