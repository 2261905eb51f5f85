#include <fstream>
#include <iterator>

#include "doctest.h"
#include "helpers.hpp"

#include "spoc/model_io.hpp"
#include "spoc/random.hpp"
#include "spoc/text.hpp"

using namespace spoc;
using testing::TempDir;

namespace {

Matrix normal_rows(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("model_io") {

TEST_CASE("PCA model round-trips exactly and stays orthonormal") {
  TempDir dir("model_pca");
  Rng rng(1);
  const auto model = fit_pca(normal_rows(rng, 300, 40), 32, true);
  write_pca_model(model, dir / "pca.model");
  const auto back = read_pca_model(dir / "pca.model");
  CHECK(back.components == model.components);
  CHECK(back.mean == model.mean);
  CHECK(back.singulars == model.singulars);
  CHECK(back.whiten == model.whiten);
  CHECK(back.center == model.center);
  CHECK(orthonormality_error(back.components) < 1e-8);

  write_pca_model(model, dir / "again.model");
  CHECK(slurp(dir / "pca.model") == slurp(dir / "again.model"));

  const auto file = decode_model(slurp(dir / "pca.model"));
  CHECK(file.header.at("D") == 40);
  CHECK(file.header.at("N") == 32);
  CHECK(file.header.at("sign_convention") == "largest_abs_entry_positive");
}

TEST_CASE("embedder models round-trip") {
  Rng rng(2);
  const Matrix x = normal_rows(rng, 200, 6);
  const Vector probe = normal_rows(rng, 1, 6).row(0).transpose();
  const std::vector<Embedder> embedders{fit_vlad(x, 3, 1), fit_fisher(x, 2, 1), fit_triang(x, 2, 1)};
  for (const auto& e : embedders) {
    const auto back = embedder_from_model(decode_model(encode_model(embedder_to_model(e, 7))));
    CHECK(back.index() == e.index());
    CHECK(embed_feature(back, probe) == embed_feature(e, probe));
  }
}

TEST_CASE("corrupted model files") {
  Rng rng(3);
  const auto bytes = encode_model(pca_to_model(fit_pca(normal_rows(rng, 20, 3), 2, false)));
  auto magic = bytes;
  magic[1] = '?';
  CHECK_ERROR(decode_model(magic), ErrorCode::MalformedHeader);
  CHECK_ERROR(decode_model(bytes.substr(0, bytes.size() - 8)), ErrorCode::ShapeMismatch);
  CHECK_ERROR(decode_model(bytes + "z"), ErrorCode::ShapeMismatch);
  CHECK_ERROR(embedder_from_model(decode_model(bytes)), ErrorCode::MalformedHeader);
  CHECK_ERROR(read_pca_model("/nonexistent/pca.model"), ErrorCode::IoFailure);
}

}  // TEST_SUITE

TEST_SUITE("text") {

TEST_CASE("numbers print in shortest round-trip form") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(0.1 + 0.2) == "0.30000000000000004");
  CHECK(split("a,b,,c", ',') == std::vector<std::string_view>{"a", "b", "", "c"});
}

}  // TEST_SUITE
