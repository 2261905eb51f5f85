#include <cmath>
#include <fstream>
#include <iterator>
#include <cstring>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"

#include "spoc/feature_store.hpp"
#include "spoc/random.hpp"
#include "spoc/synthetic.hpp"

using namespace spoc;
using testing::TempDir;

namespace {

FeatureMap one_to_eight() {
  std::vector<float> data{1, 2, 3, 4, 5, 6, 7, 8};
  return FeatureMap("img", 2, 2, 2, data, stride16_geometry(2, 2));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("feature_store") {

TEST_CASE("2x2x2 map round-trips through a file") {
  TempDir dir("fs_roundtrip");
  const auto m = one_to_eight();
  write_feature_file(m, dir / "a.feat");
  CHECK(read_feature_file(dir / "a.feat") == m);
}

TEST_CASE("single-cell map round-trips and repeated writes are byte-identical") {
  TempDir dir("fs_single");
  const FeatureMap m("one", 1, 1, 1, {42.0f}, stride16_geometry(1, 1));
  write_feature_file(m, dir / "a.feat");
  write_feature_file(m, dir / "b.feat");
  CHECK(read_feature_file(dir / "a.feat") == m);
  CHECK(slurp(dir / "a.feat") == slurp(dir / "b.feat"));
}

TEST_CASE("byte layout of the header") {
  const auto bytes = encode_feature_file(one_to_eight());
  REQUIRE(bytes.size() == 8 + 9 * 4 + 3 + 8 * 4);
  CHECK(bytes.substr(0, 8) == "SPOCFEAT");
  auto u32 = [&](std::size_t field) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + 8 + 4 * field, 4);
    return v;
  };
  CHECK(u32(0) == 1);   // version
  CHECK(u32(1) == 2);   // C
  CHECK(u32(4) == 16);  // stride
  CHECK(u32(5) == 8);   // offset
  CHECK(u32(6) == 32);  // input_h
  CHECK(u32(8) == 3);   // id_len
  float first;
  std::memcpy(&first, bytes.data() + 8 + 36 + 3, 4);
  CHECK(first == 1.0f);
}

TEST_CASE("short payload is a shape mismatch") {
  auto bytes = encode_feature_file(one_to_eight());
  bytes.resize(bytes.size() - 4);
  CHECK_ERROR(decode_feature_file(bytes), ErrorCode::ShapeMismatch);
}

TEST_CASE("NaN in the payload is rejected") {
  auto bytes = encode_feature_file(one_to_eight());
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + bytes.size() - 4, &nan, 4);
  CHECK_ERROR(decode_feature_file(bytes), ErrorCode::NonFiniteValue);
}

TEST_CASE("bad magic and version are malformed headers") {
  auto bytes = encode_feature_file(one_to_eight());
  auto wrong_magic = bytes;
  wrong_magic[0] = 'X';
  CHECK_ERROR(decode_feature_file(wrong_magic), ErrorCode::MalformedHeader);
  auto wrong_version = bytes;
  wrong_version[8] = 7;
  CHECK_ERROR(decode_feature_file(wrong_version), ErrorCode::MalformedHeader);
  CHECK_ERROR(decode_feature_file(bytes.substr(0, 20)), ErrorCode::MalformedHeader);
}

TEST_CASE("invalid maps are rejected at construction, before any write") {
  CHECK_ERROR(FeatureMap("x", 2, 2, 2, std::vector<float>(7), stride16_geometry(2, 2)),
              ErrorCode::ShapeMismatch);
  CHECK_ERROR(FeatureMap("x", 1, 1, 1, {std::numeric_limits<float>::infinity()},
                         stride16_geometry(1, 1)),
              ErrorCode::NonFiniteValue);
  // centers would run two strides past a 16-pixel-wide image
  CHECK_ERROR(FeatureMap("x", 1, 1, 3, std::vector<float>(3), {16, 8, 16, 16}),
              ErrorCode::ShapeMismatch);
}

TEST_CASE("unwritable destination is an I/O failure") {
  CHECK_ERROR(write_feature_file(one_to_eight(), "/nonexistent_dir/sub/a.feat"),
              ErrorCode::IoFailure);
  CHECK_ERROR(read_feature_file("/nonexistent_dir/a.feat"), ErrorCode::IoFailure);
}

TEST_CASE("receptive field centers") {
  const auto g = reference_geometry();
  CHECK(receptive_field_center(g, 37, 37, 1, 1) == PixelCenter{8, 8});
  CHECK(receptive_field_center(g, 37, 37, 2, 3) == PixelCenter{24, 40});
  CHECK_ERROR(receptive_field_center(g, 37, 37, 38, 1), ErrorCode::OutOfBounds);
  CHECK_ERROR(receptive_field_center(g, 37, 37, 1, 0), ErrorCode::OutOfBounds);
  // last column: 8 + 36 * 16 = 584 fits a 586-pixel image
  CHECK(receptive_field_center(g, 37, 37, 37, 37) == PixelCenter{584, 584});
  // a center past the edge is clamped
  const ReceptiveFieldGeometry tight{16, 8, 20, 20};
  CHECK(receptive_field_center(tight, 2, 2, 2, 2) == PixelCenter{19, 19});
}

TEST_CASE("receptive field centers are monotone in x and y") {
  const auto g = reference_geometry();
  for (std::uint32_t y = 1; y <= 37; ++y) {
    for (std::uint32_t x = 1; x < 37; ++x) {
      CHECK(receptive_field_center(g, 37, 37, x, y).px < receptive_field_center(g, 37, 37, x + 1, y).px);
      CHECK(receptive_field_center(g, 37, 37, y, x).py < receptive_field_center(g, 37, 37, y, x + 1).py);
    }
  }
}

TEST_CASE("local features use 1-based coordinates") {
  const auto m = one_to_eight();
  const auto f = m.local_feature(2, 1);
  CHECK(f.vector == std::vector<float>{2, 6});
  CHECK(m.at(1, 0, 1) == 6);
  CHECK_ERROR(m.local_feature(3, 1), ErrorCode::OutOfBounds);
  CHECK_ERROR(m.local_feature(0, 1), ErrorCode::OutOfBounds);
}

TEST_CASE("property: random maps round-trip bit-exactly") {
  Rng rng(11);
  for (int t = 0; t < 30; ++t) {
    const auto c = static_cast<std::uint32_t>(1 + rng.index(6));
    const auto h = static_cast<std::uint32_t>(1 + rng.index(7));
    const auto w = static_cast<std::uint32_t>(1 + rng.index(7));
    const auto m = synthetic::random_map(rng, "r" + std::to_string(t), c, h, w, -1e6, 1e6);
    CHECK(decode_feature_file(encode_feature_file(m)) == m);
  }
}

TEST_CASE("negative offsets survive the u32 field") {
  const FeatureMap m("neg", 1, 2, 2, {1, 2, 3, 4}, {16, -4, 32, 32});
  CHECK(decode_feature_file(encode_feature_file(m)).geometry().offset == -4);
}

TEST_CASE("manifest round trip and relative path resolution") {
  TempDir dir("fs_manifest");
  std::filesystem::create_directories(dir / "feats");
  const auto m = one_to_eight();
  write_feature_file(m, dir / "feats" / "img.feat");
  write_manifest({{"img", "feats/img.feat"}}, dir / "manifest.json");
  const auto entries = read_manifest(dir / "manifest.json");
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].path == dir / "feats" / "img.feat");
  CHECK(load_manifest_maps(entries).at(0) == m);
}

TEST_CASE("malformed manifests") {
  TempDir dir("fs_bad_manifest");
  {
    std::ofstream(dir / "a.json") << "{\"image_id\": 1}";
  }
  CHECK_ERROR(read_manifest(dir / "a.json"), ErrorCode::MalformedHeader);
  {
    std::ofstream(dir / "b.json") << "[{\"image_id\": 3, \"path\": \"x\"}]";
  }
  CHECK_ERROR(read_manifest(dir / "b.json"), ErrorCode::MalformedHeader);
  {
    std::ofstream(dir / "c.json") << "[not json";
  }
  CHECK_ERROR(read_manifest(dir / "c.json"), ErrorCode::MalformedHeader);
}

TEST_CASE("loading many maps keeps manifest order") {
  TempDir dir("fs_many");
  Rng rng(3);
  std::vector<ManifestEntry> entries;
  std::vector<FeatureMap> maps;
  for (int i = 0; i < 12; ++i) {
    maps.push_back(synthetic::random_map(rng, "m" + std::to_string(i), 3, 2, 2));
    entries.push_back({maps.back().image_id(), dir / (maps.back().image_id() + ".feat")});
    write_feature_file(maps.back(), entries.back().path);
  }
  CHECK(load_manifest_maps(entries) == maps);
}

}  // TEST_SUITE
