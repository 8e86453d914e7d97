#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "polydt/prettify.hpp"

using namespace polydt;
using Catch::Approx;

namespace {

Matrix make_matrix(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c) m.at(r, c) = rows[r][c];
  return m;
}

}  // namespace

TEST_CASE("feature_relevance keeps a variable whose removal collides") {
  // 10 points on a grid; x2 never influences the label, x1 does.
  ControllerDataset ds = parse_controller_csv(
      "x1,x2,action\n"
      "1,1,a\n1,2,a\n1,3,a\n1,5,a\n"
      "2,1,b\n2,4,b\n"
      "3,2,c\n3,3,c\n"
      "4,1,a\n4,3,a\n");
  RelevanceReport rep = feature_relevance(ds);
  CHECK(rep.collision_ratio[0] == Approx(0.8));
  CHECK(rep.collision_ratio[1] == 0.0);
  CHECK(rep.removed == std::vector<size_t>{1});
}

TEST_CASE("feature_relevance removals are incremental") {
  // Dropping x1 causes no collision, so it goes first; the later x2 test
  // then groups every row together (no variables left) and must keep x2.
  ControllerDataset ds = parse_controller_csv(
      "x1,x2,action\n"
      "1,4,a\n1,3,a\n2,1,b\n3,2,b\n4,4,a\n");
  RelevanceReport rep = feature_relevance(ds);
  CHECK(rep.collision_ratio[0] == 0.0);
  CHECK(rep.collision_ratio[1] == 1.0);
  CHECK(rep.removed == std::vector<size_t>{0});
}

TEST_CASE("feature_relevance is idempotent after dropping") {
  ControllerDataset ds = parse_controller_csv(
      "x1,x2,action\n"
      "1,1,a\n1,2,a\n1,3,a\n1,5,a\n"
      "2,1,b\n2,4,b\n"
      "3,2,c\n3,3,c\n"
      "4,1,a\n4,3,a\n");
  RelevanceReport first = feature_relevance(ds);
  ControllerDataset reduced = drop_variables(ds, first.removed);
  RelevanceReport second = feature_relevance(reduced);
  CHECK(second.removed.empty());
}

TEST_CASE("zero_coefficients removes junk dimensions smallest first") {
  // Labels depend on x1 only; x0 and x2 carry small noise weights.
  Matrix rows = make_matrix({{0.2, 1, -0.3}, {-0.4, -1, 0.1}, {0.3, 2, 0.2}, {0.1, -2, -0.2}});
  std::vector<int> y{1, -1, 1, -1};
  Hyperplane plane{{0.5, 3.0, 0.01}, 0.0};
  std::vector<double> base{0.5, 3.0, 0.01};
  RetrainFn retrain = [&](const std::vector<bool>& excluded) -> std::optional<Hyperplane> {
    Hyperplane h{base, 0.0};
    for (size_t d = 0; d < excluded.size(); ++d)
      if (excluded[d]) h.weights[d] = 0.0;
    return h;
  };
  PrettifyStats stats;
  Hyperplane out = zero_coefficients(rows, y, plane, retrain, &stats);
  CHECK(out.weights == std::vector<double>{0.0, 3.0, 0.0});
  CHECK(stats.zeroed_dims == std::vector<size_t>{2, 0});
}

TEST_CASE("zero_coefficients restores a removal that flips a side") {
  Matrix rows = make_matrix({{1, -1}, {-1, 1}, {1, -2}, {-1, 0.5}});
  std::vector<int> y{1, -1, -1, -1};
  Hyperplane plane{{1.0, 0.9}, 0.0};
  // Retrain keeps the remaining coefficient as-is; removing either
  // dimension changes some row's side, so both removals must back out.
  RetrainFn retrain = [&](const std::vector<bool>& excluded) -> std::optional<Hyperplane> {
    Hyperplane h = plane;
    for (size_t d = 0; d < excluded.size(); ++d)
      if (excluded[d]) h.weights[d] = 0.0;
    return h;
  };
  PrettifyStats stats;
  Hyperplane out = zero_coefficients(rows, y, plane, retrain, &stats);
  CHECK(out.weights == plane.weights);
  CHECK(stats.zeroed_dims.empty());
}

TEST_CASE("zero_coefficients tolerates failing retrains") {
  Matrix rows = make_matrix({{1.0}, {-1.0}});
  std::vector<int> y{1, -1};
  Hyperplane plane{{2.0}, 0.0};
  RetrainFn retrain = [](const std::vector<bool>&) { return std::optional<Hyperplane>{}; };
  Hyperplane out = zero_coefficients(rows, y, plane, retrain, nullptr);
  CHECK(out.weights == plane.weights);
}

TEST_CASE("scale_hyperplane normalizes the coefficient closest to one") {
  PrettifyStats stats;
  Hyperplane out = scale_hyperplane(Hyperplane{{0.5, 0.1, 0.3}, 0.2}, &stats);
  CHECK(out.weights[0] == Approx(1.0));
  CHECK(out.weights[1] == Approx(0.2));
  CHECK(out.weights[2] == Approx(0.6));
  CHECK(out.bias == Approx(0.4));
  CHECK(stats.scale_factor == Approx(2.0));
}

TEST_CASE("scale_hyperplane leaves a unit coefficient alone") {
  Hyperplane out = scale_hyperplane(Hyperplane{{-1.0, 0.3}, 5.0});
  CHECK(out.weights == std::vector<double>{-1.0, 0.3});
  CHECK(out.bias == 5.0);
}

TEST_CASE("scale_hyperplane always produces a unit coefficient") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> val(-100.0, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    Hyperplane h{{val(rng), val(rng), val(rng)}, val(rng)};
    Hyperplane out = scale_hyperplane(h);
    bool has_unit = false;
    for (double w : out.weights) has_unit |= std::fabs(w) == 1.0;
    CHECK(has_unit);
  }
  // no nonzero coefficients: nothing to scale
  Hyperplane zero = scale_hyperplane(Hyperplane{{0.0, 0.0}, 3.0});
  CHECK(zero.bias == 3.0);
}

TEST_CASE("round_coefficients reaches the integer form the rows tolerate") {
  Matrix rows = make_matrix({{1, 2}, {1, 3}, {1, 4}});
  Hyperplane plane{{8.165839, -2.935846}, 0.0};
  PrettifyStats stats;
  Hyperplane out = round_coefficients(plane, rows, &stats);
  CHECK(out.weights[0] == 8.0);
  CHECK(out.weights[1] == -3.0);
  CHECK(out.bias == 0.0);
  CHECK(stats.rounded_terms == 2);
  CHECK(count_side_changes(plane, out, rows) == 0);
}

TEST_CASE("round_coefficients rounds the intercept last") {
  Matrix rows = make_matrix({{1.0}, {4.0}});
  Hyperplane plane{{1.0}, 2.468135};
  Hyperplane out = round_coefficients(plane, rows, nullptr);
  // decision is x - bias: 1 - 2.468 < 0, 4 - 2.468 > 0. The power-of-ten
  // candidate 1 would flip the first row, so one significant digit wins.
  CHECK(out.weights[0] == 1.0);
  CHECK(out.bias == 2.0);
}

TEST_CASE("overapprox_candidate nudges by a relative margin") {
  CHECK(detail::overapprox_candidate(2.953, 3.0) == Approx(3.00001).margin(1e-12));
  CHECK(detail::overapprox_candidate(-2.935846, -3.0) == Approx(-3.00001).margin(1e-12));
  CHECK(detail::overapprox_candidate(5.0, 5.0) == 5.0);
  CHECK(detail::overapprox_candidate(123.4, 100.0) == Approx(100.0 - 1e-3).margin(1e-12));
}

TEST_CASE("round_significant and nearest_power_of_ten behave") {
  CHECK(detail::round_significant(-2.935846, 1) == -3.0);
  CHECK(detail::round_significant(8.165839, 2) == Approx(8.2));
  CHECK(detail::round_significant(0.0, 3) == 0.0);
  CHECK(detail::nearest_power_of_ten(0.02) == Approx(0.01));
  CHECK(detail::nearest_power_of_ten(55.0) == 10.0);  // tie goes to the smaller
  CHECK(detail::nearest_power_of_ten(-55.0) == -10.0);
  CHECK(detail::nearest_power_of_ten(7.0) == 10.0);
}

TEST_CASE("rounding and scaling never change a side on random fixtures") {
  std::mt19937 rng(321);
  std::uniform_real_distribution<double> coef(-50.0, 50.0);
  std::uniform_real_distribution<double> pt(-10.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    size_t d = 1 + rng() % 5, n = 2 + rng() % 30;
    Hyperplane h{{}, coef(rng)};
    for (size_t j = 0; j < d; ++j) h.weights.push_back(coef(rng));
    Matrix rows(n, d);
    for (auto& v : rows.data) v = pt(rng);
    Hyperplane scaled = scale_hyperplane(h);
    CHECK(count_side_changes(h, scaled, rows) == 0);
    Hyperplane rounded = round_coefficients(scaled, rows, nullptr);
    CHECK(count_side_changes(scaled, rounded, rows) == 0);
  }
}

TEST_CASE("clamp_coefficients applies hard magnitude guards") {
  PrettifyStats stats;
  Hyperplane out = clamp_coefficients(Hyperplane{{1e9, -3e8, 1e-9, -1e-9, 0.0, 3.5}, 1e18}, &stats);
  CHECK(out.weights[0] == 1e7);
  CHECK(out.weights[1] == -1e7);
  CHECK(out.weights[2] == 1e-7);
  CHECK(out.weights[3] == -1e-7);
  CHECK(out.weights[4] == 0.0);
  CHECK(out.weights[5] == 3.5);
  CHECK(out.bias == 1e7);
  CHECK(stats.clamped_terms == 5);
}

TEST_CASE("count_side_changes counts flipped rows") {
  Matrix rows = make_matrix({{1, 0}, {2, 0}, {-1, 0}});
  Hyperplane before{{1.0, 0.0}, 0.0};
  Hyperplane after{{-1.0, 0.0}, 0.0};
  CHECK(count_side_changes(before, after, rows) == 3);
  CHECK(count_side_changes(before, before, rows) == 0);
}

TEST_CASE("the cosmetic chain is idempotent") {
  Matrix rows = make_matrix({{1, 2}, {1, 3}, {1, 4}});
  std::vector<int> y{1, -1, -1};
  RetrainFn retrain = [](const std::vector<bool>&) { return std::optional<Hyperplane>{}; };
  auto chain = [&](Hyperplane h) {
    h = zero_coefficients(rows, y, h, retrain, nullptr);
    h = scale_hyperplane(h);
    return round_coefficients(h, rows, nullptr);
  };
  Hyperplane once = chain(Hyperplane{{8.165839, -2.935846}, 0.0});
  Hyperplane twice = chain(once);
  CHECK(once.weights == twice.weights);
  CHECK(once.bias == twice.bias);
}
