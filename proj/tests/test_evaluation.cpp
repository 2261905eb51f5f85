#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

#include "spoc/evaluation.hpp"
#include "spoc/random.hpp"
#include "spoc/synthetic.hpp"

using namespace spoc;

namespace {

TruthEntry truth_of(std::set<std::string> relevant, std::set<std::string> junk = {}) {
  return {std::move(relevant), std::move(junk), std::nullopt};
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("hand-computed average precision") {
  CHECK(average_precision({"r"}, truth_of({"r"})) == 1.0);
  // junk removed: hits at ranks 1 and 3
  CHECK(average_precision({"r1", "j", "n", "r2"}, truth_of({"r1", "r2"}, {"j"})) ==
        (1.0 / 1 + 2.0 / 3) / 2);
  CHECK(average_precision({"r1", "j", "n", "r2"}, truth_of({"r1", "r2"}, {"j"})) ==
        doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(average_precision({"a", "b", "c"}, truth_of({"r1", "r2"})) == 0.0);
  // junk-heavy: [r1, n, r2] after removal
  CHECK(average_precision({"j1", "j2", "r1", "j3", "n", "r2", "j4"},
                          truth_of({"r1", "r2"}, {"j1", "j2", "j3", "j4"})) ==
        (1.0 / 1 + 2.0 / 3) / 2);
  // two of three relevant never retrieved
  CHECK(average_precision({"n1", "r1", "n2"}, truth_of({"r1", "r2", "r3"})) == (1.0 / 2) / 3);
  CHECK(average_precision({"n1", "n2", "r1", "r2"}, truth_of({"r1", "r2"})) ==
        (1.0 / 3 + 2.0 / 4) / 2);
  CHECK(average_precision({"r1", "r2", "r3", "n"}, truth_of({"r1", "r2", "r3"})) == 1.0);
  CHECK_ERROR(average_precision({"a"}, truth_of({})), ErrorCode::EmptyRelevantSet);
}

TEST_CASE("property: junk insertion leaves AP unchanged") {
  Rng rng(1);
  const auto truth = truth_of({"r1", "r2", "r3"}, {"j1", "j2", "j3", "j4", "j5"});
  const std::vector<std::string> base{"n1", "r2", "n2", "r1", "n3", "n4", "r3"};
  const double ap = average_precision(base, truth);
  for (int t = 0; t < 100; ++t) {
    auto ranking = base;
    for (const auto& j : truth.junk) {
      if (rng.uniform() < 0.3) continue;
      ranking.insert(ranking.begin() + static_cast<std::ptrdiff_t>(rng.index(ranking.size() + 1)), j);
    }
    CHECK(average_precision(ranking, truth) == ap);
  }
}

TEST_CASE("property: AP is 1 exactly when all relevant come first") {
  const auto truth = truth_of({"a", "b"});
  CHECK(average_precision({"b", "a", "x"}, truth) == 1.0);
  CHECK(average_precision({"b", "x", "a"}, truth) < 1.0);
  CHECK(average_precision({"b", "x"}, truth) < 1.0);
}

TEST_CASE("mean average precision") {
  GroundTruth gt{{"q1", truth_of({"a"})}, {"q2", truth_of({"b"})}};
  CHECK(mean_average_precision({{"q1", {"a"}}, {"q2", {"c"}}}, gt) == 0.5);
  CHECK(mean_average_precision({{"q1", {"x", "a"}}}, gt) == 0.5);
  CHECK_ERROR(mean_average_precision({{"q3", {"a"}}}, gt), ErrorCode::MissingTruth);
  CHECK_ERROR(mean_average_precision({}, gt), ErrorCode::MissingTruth);
}

TEST_CASE("UKB score") {
  GroundTruth gt{{"q", truth_of({"q", "a", "b", "c"})}, {"p", truth_of({"p", "d", "e", "f"})}};
  CHECK(ukb_score({{"q", {"q", "a", "b", "c", "z"}}}, gt) == 4.0);
  CHECK(ukb_query_score({"a", "z", "b", "c"}, gt.at("q")) == 3.0);
  CHECK(ukb_score({{"q", {"q", "a", "b", "c"}}, {"p", {"x", "y", "d", "z"}}}, gt) == 2.5);
  CHECK_ERROR(ukb_score({{"q", {"q", "a", "b"}}}, gt), ErrorCode::ShortRanking);
}

TEST_CASE("ground truth JSON") {
  const auto gt = parse_ground_truth(R"({"q": {"relevant": ["a", "b"], "junk": ["c"], "box": [1, 2, 30, 40]},
                                         "p": {"relevant": ["q"]}})");
  CHECK(gt.at("q").relevant.size() == 2);
  CHECK(gt.at("q").box->x_max == 30);
  CHECK(gt.at("p").junk.empty());
  CHECK_FALSE(gt.at("p").box);
  const auto again = parse_ground_truth(encode_ground_truth(gt));
  CHECK(again.at("q").junk == gt.at("q").junk);
  CHECK(again.at("q").box->y_max == 40);
  CHECK_ERROR(parse_ground_truth(R"({"q": {"relevant": ["a"], "junk": ["a"]}})"), ErrorCode::MalformedHeader);
  CHECK_ERROR(parse_ground_truth("[1]"), ErrorCode::MalformedHeader);
  CHECK_ERROR(parse_ground_truth(R"({"q": {"relevant": [1]}})"), ErrorCode::MalformedHeader);
  CHECK_ERROR(parse_ground_truth(R"({"q": {"box": [1, 2]}})"), ErrorCode::MalformedHeader);
}

TEST_CASE("distance ratio arithmetic") {
  Matrix ref(5, 1);
  ref << 1, 2, 3, 4, 5;
  const auto curve = distance_ratio_single(Vector::Zero(1), ref, 3);
  CHECK(curve[0] == doctest::Approx(1.0 / 3));
  CHECK(curve[1] == doctest::Approx(2.0 / 3));
  CHECK(curve[2] == doctest::Approx(1.0));

  Matrix dup(4, 2);
  dup << 0, 0, 1, 1, 2, 2, 3, 3;
  CHECK(distance_ratio_single(Vector::Zero(2), dup, 2)[0] == 0.0);
  // even count: median is the mean of the middle pair
  CHECK(distance_ratio_single(Vector::Zero(2), dup, 2)[1] ==
        doctest::Approx(std::sqrt(2.0) / (1.5 * std::sqrt(2.0))));

  CHECK_ERROR(distance_ratio_single(Vector::Zero(1), ref, 5), ErrorCode::InsufficientReference);
  CHECK_ERROR(distance_ratio_single(Vector::Zero(2), ref, 2), ErrorCode::DimensionMismatch);
  CHECK_ERROR(distance_ratio_single(Vector::Zero(1), Matrix::Zero(4, 1), 2), ErrorCode::NumericFailure);
}

TEST_CASE("property: ratio curves are monotone and independent of query order") {
  Rng rng(2);
  const Matrix ref = synthetic::uniform_points(rng, 500, 6);
  const Matrix queries = synthetic::uniform_points(rng, 12, 6);
  const auto curve = distance_ratio_curve(queries, ref, 40);
  REQUIRE(curve.ratios.size() == 40);
  for (std::size_t k = 1; k < 40; ++k) CHECK(curve.ratios[k] >= curve.ratios[k - 1]);
  CHECK(curve.ratios.front() > 0.0);
  CHECK(curve.ratios.back() <= 1.0);
  const Matrix reversed = queries.colwise().reverse();
  const auto other = distance_ratio_curve(reversed, ref, 40);
  for (std::size_t k = 0; k < 40; ++k) CHECK(other.ratios[k] == doctest::Approx(curve.ratios[k]).epsilon(1e-14));
}

TEST_CASE("selection counts") {
  Rng rng(3);
  const auto big = synthetic::random_map(rng, "m", 1, 37, 37);
  CHECK(selection_count(big, 0.01) == 14);
  const auto hundred = synthetic::random_map(rng, "m", 1, 10, 10);
  CHECK(selection_count(hundred, 0.01) == 1);
  CHECK(selection_count(hundred, 1.0) == 100);
  CHECK_ERROR(selection_count(hundred, 0.0), ErrorCode::InvalidArgument);
  CHECK_ERROR(selection_count(hundred, 1.5), ErrorCode::InvalidArgument);
}

TEST_CASE("top-norm selection") {
  const auto m = testing::map_from_cells({{1, 0}, {3, 4}, {0, 3}}, 1, 3);
  const auto top = select_top_norm_features(m, 0.3);
  REQUIRE(top.size() == 1);
  CHECK(top[0].x == 2);
  CHECK(select_top_norm_features(m, 1.0).size() == 3);
  // equal norms resolve by (y, x)
  const auto ties = testing::map_from_cells({{1}, {2}, {2}, {1}}, 2, 2);
  const auto picked = select_top_norm_features(ties, 0.5);
  CHECK(picked[0].x == 2);
  CHECK(picked[0].y == 1);
  CHECK(picked[1].x == 1);
  CHECK(picked[1].y == 2);
}

TEST_CASE("random selection is seeded and sorted") {
  Rng rng(4);
  const auto m = synthetic::random_map(rng, "m", 2, 6, 6);
  const auto a = select_random_features(m, 0.25, 9);
  const auto b = select_random_features(m, 0.25, 9);
  REQUIRE(a.size() == 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].y == b[i].y);
    if (i > 0) CHECK(std::pair(a[i - 1].y, a[i - 1].x) < std::pair(a[i].y, a[i].x));
  }
  const Vector s = sum_features(a);
  double manual = 0.0;
  for (const auto& f : a) manual += f.vector[1];
  CHECK(s[1] == doctest::Approx(manual));
}

TEST_CASE("top-norm subsampling beats random on the class benchmark") {
  const auto bench = synthetic::make_norm_benchmark(1);
  const double top = subsample_retrieval_map(bench.maps, bench.truth, 0.01, FeatureSelection::TopNorm, 1);
  const double rnd = subsample_retrieval_map(bench.maps, bench.truth, 0.01, FeatureSelection::Random, 1);
  CHECK(top > rnd);
  CHECK(top <= 1.0);
  CHECK(rnd >= 0.0);
}

TEST_CASE("rank_all drops the query only when asked") {
  std::vector<std::pair<std::string, Vector>> rows{{"a", Vector{{1.0, 0.0}}}, {"b", Vector{{0.0, 1.0}}}};
  const auto index = build_index(rows);
  CHECK(rank_all(index, rows[0].second, "a", true) == std::vector<std::string>{"a", "b"});
  CHECK(rank_all(index, rows[0].second, "a", false) == std::vector<std::string>{"b"});
}

}  // TEST_SUITE
