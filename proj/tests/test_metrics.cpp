#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "argd/metrics.hpp"

using namespace argd;

namespace {

metrics::LayerTrace make_trace(std::size_t id, std::size_t in, std::size_t out,
                               std::vector<std::size_t> ranks, std::size_t baseline) {
  metrics::LayerTrace trace;
  trace.layer_id = id;
  trace.in_dim = in;
  trace.out_dim = out;
  trace.rank_series = std::move(ranks);
  trace.baseline_rank = baseline;
  return trace;
}

}  // namespace

TEST_CASE("layer effective rank is the series mean", "[metrics]") {
  CHECK(metrics::layer_effective_rank(
            make_trace(0, 8, 8, std::vector<std::size_t>(100, 4), 8)) == 4.0);
  CHECK(metrics::layer_effective_rank(make_trace(0, 8, 8, {8, 8, 4, 4}, 8)) == 6.0);
  CHECK_THROWS_AS(metrics::layer_effective_rank(make_trace(0, 8, 8, {}, 8)), Error);

  SECTION("bounded by the series extremes") {
    const auto trace = make_trace(0, 8, 8, {3, 7, 5, 2, 6}, 8);
    const double eff = metrics::layer_effective_rank(trace);
    CHECK(eff >= 2.0);
    CHECK(eff <= 7.0);
  }
}

TEST_CASE("weighted average rank across layers", "[metrics]") {
  SECTION("single layer specialization") {
    const auto trace = make_trace(0, 6, 4, {3, 3, 3}, 8);
    CHECK(metrics::total_weighted_avg_rank({trace}) ==
          Catch::Approx(3.0 * (6 + 4) / (6.0 * 4.0)));
  }
  SECTION("two equal layers, direct evaluation") {
    const auto a = make_trace(0, 4, 4, {2}, 8);
    const auto b = make_trace(1, 4, 4, {4}, 8);
    CHECK(metrics::total_weighted_avg_rank({a, b}) == Catch::Approx(1.5));
  }
  SECTION("linear in the ranks") {
    const auto a = make_trace(0, 5, 3, {2, 4}, 8);
    const auto b = make_trace(1, 3, 7, {1, 5}, 8);
    const auto a2 = make_trace(0, 5, 3, {4, 8}, 8);
    const auto b2 = make_trace(1, 3, 7, {2, 10}, 8);
    CHECK(metrics::total_weighted_avg_rank({a2, b2}) ==
          Catch::Approx(2.0 * metrics::total_weighted_avg_rank({a, b})));
  }
  SECTION("mismatched lengths rejected") {
    const auto a = make_trace(0, 4, 4, {2, 2}, 8);
    const auto b = make_trace(1, 4, 4, {4}, 8);
    CHECK_THROWS_AS(metrics::total_weighted_avg_rank({a, b}), Error);
  }
}

TEST_CASE("memory reduction accounting", "[metrics]") {
  CHECK(metrics::memory_reduction(make_trace(0, 64, 32, {6, 6}, 8)) ==
        Catch::Approx(2.0 * 96.0));
  CHECK(metrics::memory_reduction(make_trace(0, 64, 32, {8, 8}, 8)) == 0.0);
  SECTION("negative reduction is reported as-is") {
    CHECK(metrics::memory_reduction(make_trace(0, 10, 10, {6}, 4)) ==
          Catch::Approx(-2.0 * 20.0));
  }
  SECTION("bf16 bytes are two per element") {
    const auto trace = make_trace(0, 64, 32, {6, 6}, 8);
    const double red = metrics::memory_reduction(trace);
    CHECK(red * metrics::kBytesPerElementBf16 == Catch::Approx(2.0 * red));
  }
}

TEST_CASE("optimizer state element counts", "[metrics]") {
  CHECK(metrics::optimizer_state_elements(256, 64, 4, metrics::Method::adarankgrad) == 1536.0);
  CHECK(metrics::optimizer_state_elements(2, 2, 1, metrics::Method::full) == 8.0);
  CHECK_THROWS_AS(metrics::optimizer_state_elements(4, 8, 2, metrics::Method::galore), Error);

  SECTION("adaptive count never exceeds the fixed count at equal or lower rank") {
    for (std::size_t n : {8, 64, 256}) {
      for (std::size_t m : {4, 8, 64}) {
        if (n < m) continue;
        for (double fixed : {4.0, 8.0}) {
          for (double adaptive : {1.0, 2.5, 4.0}) {
            if (adaptive > fixed) continue;
            const double a =
                metrics::optimizer_state_elements(n, m, adaptive, metrics::Method::adarankgrad);
            const double g = metrics::optimizer_state_elements(n, m, fixed, metrics::Method::galore);
            CHECK(a <= g);
            if (adaptive < fixed) CHECK(a < g);
          }
        }
      }
    }
  }
  SECTION("lora stores both factor moments") {
    CHECK(metrics::optimizer_state_elements(16, 8, 2, metrics::Method::lora) ==
          Catch::Approx(2.0 * 16 * 2 + 2.0 * 8 * 2));
  }
}

TEST_CASE("summary document reproduces the statistics", "[metrics]") {
  const std::vector<metrics::LayerTrace> traces{
      make_trace(0, 32, 32, {8, 6, 4, 4}, 8),
      make_trace(1, 32, 8, {4, 3, 2, 1}, 8),
  };
  const nlohmann::ordered_json doc = metrics::summary_json(traces);
  REQUIRE(doc["layers"].size() == 2);
  CHECK(doc["layers"][0]["effective_rank"].get<double>() ==
        Catch::Approx(metrics::layer_effective_rank(traces[0])));
  CHECK(doc["layers"][1]["mem_reduction_elements"].get<double>() ==
        Catch::Approx(metrics::memory_reduction(traces[1])));
  CHECK(doc["total_weighted_avg_rank"].get<double>() ==
        Catch::Approx(metrics::total_weighted_avg_rank(traces)));
  CHECK(doc["total_mem_reduction_elements"].get<double>() ==
        Catch::Approx(metrics::total_memory_reduction(traces)));
  CHECK(doc.contains("total_weighted_avg_rank_formula"));

  SECTION("round trip through serialization") {
    const std::string text = doc.dump(2);
    const auto parsed = nlohmann::ordered_json::parse(text);
    CHECK(parsed["total_weighted_avg_rank"].get<double>() ==
          doc["total_weighted_avg_rank"].get<double>());
    CHECK(parsed["layers"][0]["effective_rank"].get<double>() ==
          doc["layers"][0]["effective_rank"].get<double>());
  }
}
