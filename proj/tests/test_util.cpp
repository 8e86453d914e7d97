#include <catch2/catch_amalgamated.hpp>

#include <atomic>

#include "polydt/util.hpp"

using namespace polydt;

TEST_CASE("format_double emits shortest round-trip form") {
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-1.0) == "-1");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.5) == "2.5");
  CHECK(format_double(1e7) == "1e+07");
  for (double v : {3.141592653589793, -0.25, 1e-7, 123456.789, 2.953, 8.165839}) {
    CHECK(parse_double(format_double(v)) == v);
  }
}

TEST_CASE("parse_double rejects trailing garbage and empties") {
  CHECK(parse_double("1.5") == 1.5);
  CHECK(parse_double("-6") == -6.0);
  CHECK(parse_double("1e3") == 1000.0);
  CHECK_THROWS_AS(parse_double(""), parse_error);
  CHECK_THROWS_AS(parse_double("abc"), parse_error);
  CHECK_THROWS_AS(parse_double("1.5x"), parse_error);
  CHECK_THROWS_AS(parse_double("1.5 "), parse_error);
}

TEST_CASE("trim and split") {
  CHECK(trim("  a b  ") == "a b");
  CHECK(trim("") == "");
  CHECK(trim("\t x \t") == "x");
  auto parts = split("a,b,,c", ',');
  REQUIRE(parts.size() == 4);
  CHECK(parts[0] == "a");
  CHECK(parts[2] == "");
  CHECK(split("", ',').size() == 1);
}

TEST_CASE("fnv1a64 matches the published reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64("abc") != fnv1a64("acb"));
}

TEST_CASE("parallel_for covers every index exactly once for any thread count") {
  for (int threads : {1, 2, 3, 8}) {
    std::vector<std::atomic<int>> hits(103);
    for (auto& h : hits) h = 0;
    parallel_for(hits.size(), threads, [&](size_t i) { ++hits[i]; });
    for (auto& h : hits) CHECK(h == 1);
  }
  parallel_for(0, 4, [](size_t) { FAIL("must not be called"); });
}

TEST_CASE("parallel_for reduction is independent of the thread count") {
  auto run = [](int threads) {
    std::vector<double> slot(1000);
    parallel_for(slot.size(), threads, [&](size_t i) {
      slot[i] = static_cast<double>(i) * 0.5 + 1.0;
    });
    double sum = 0.0;
    for (double v : slot) sum += v;
    return sum;
  };
  double base = run(1);
  CHECK(run(3) == base);
  CHECK(run(16) == base);
}

TEST_CASE("Matrix indexing is row major") {
  Matrix m(2, 3);
  for (size_t r = 0; r < 2; ++r)
    for (size_t c = 0; c < 3; ++c) m.at(r, c) = static_cast<double>(r * 3 + c);
  CHECK(m.row(1)[0] == 3.0);
  CHECK(m.at(1, 2) == 5.0);
  CHECK(m.data.size() == 6);
}
