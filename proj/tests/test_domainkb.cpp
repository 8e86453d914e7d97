#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "polydt/domainkb.hpp"

using namespace polydt;
using Catch::Matchers::ContainsSubstring;

namespace {

KnowledgeBase kb_from(const std::string& text) {
  std::istringstream in(text);
  return parse_kb(in);
}

KnowledgeBase cruise_kb() {
  return parse_kb_file(std::string(POLYDT_SOURCE_DIR) + "/fixtures/cruise.kb");
}

}  // namespace

TEST_CASE("parse_kb reads quantities, symbols, and identities") {
  KnowledgeBase kb = kb_from(
      "# comment\n"
      "quantity d v t\n"
      "const t_1 t 1.5\n"
      "var v_e v\n"
      "identity d = v*t\n");
  CHECK(kb.quantities == std::vector<std::string>{"d", "v", "t"});
  REQUIRE(kb.symbols.size() == 2);
  CHECK(kb.symbols[0].is_constant);
  CHECK(kb.symbols[0].value == 1.5);
  CHECK(kb.variable_names() == std::vector<std::string>{"v_e"});
  CHECK(kb.constant_values().at("t_1") == 1.5);
  REQUIRE(kb.identities.size() == 1);
  CHECK(kb.identities[0].target_quantity == "d");
  CHECK(kb.identities[0].source_text == "v*t");
}

TEST_CASE("parse_kb reports the offending line") {
  CHECK_THROWS_WITH(kb_from("quantity d\nfrobnicate x\n"),
                    ContainsSubstring("kb line 2"));
  CHECK_THROWS_WITH(kb_from("quantity d d\n"), ContainsSubstring("duplicate quantity"));
  CHECK_THROWS_WITH(kb_from("quantity d\nvar x q\n"),
                    ContainsSubstring("unknown quantity 'q'"));
  CHECK_THROWS_WITH(kb_from("quantity d\nvar x d\nvar x d\n"),
                    ContainsSubstring("duplicate symbol 'x'"));
  CHECK_THROWS_WITH(kb_from("quantity d\nconst c d\n"),
                    ContainsSubstring("constant needs a value"));
  CHECK_THROWS_WITH(kb_from("quantity d\nidentity z = d\n"),
                    ContainsSubstring("unknown target quantity 'z'"));
  CHECK_THROWS_WITH(kb_from("quantity d\nidentity d = d*bogus\n"),
                    ContainsSubstring("non-quantity symbol 'bogus'"));
  CHECK_THROWS_AS(kb_from("quantity d\nidentity d = d*\n"), parse_error);
  CHECK_THROWS_AS(parse_kb_file("/nonexistent/file.kb"), io_error);
}

TEST_CASE("init_pools seeds one entry per symbol") {
  Pool pool = init_pools(cruise_kb());
  CHECK(pool.size() == 9);
  CHECK(pool.of_quantity("d").size() == 2);
  CHECK(pool.of_quantity("v").size() == 4);
  CHECK(pool.of_quantity("a").size() == 2);
  CHECK(pool.of_quantity("t").size() == 1);
}

TEST_CASE("expand_sums takes ordered pairs within a quantity") {
  KnowledgeBase kb = kb_from("quantity x\nvar a x\nvar b x\n");
  Pool pool = init_pools(kb);
  size_t added = expand_sums(pool, 1);
  // 2*a, a+b (== b+a), a-b, b-a, 2*b; a-a and b-b cancel away.
  CHECK(added == 5);
  CHECK(pool.size() == 7);
  CHECK(pool.index.count("x|" + expr_key(normalize(parse_expr("a + a")))) == 1);
  CHECK(pool.index.count("x|" + expr_key(normalize(parse_expr("a - b")))) == 1);
  CHECK(pool.index.count("x|" + expr_key(normalize(parse_expr("b - a")))) == 1);
  for (const auto& e : pool.entries)
    CHECK(!(e.expr->kind == ExprKind::num && e.expr->value == 0.0));
}

TEST_CASE("identity substitution reaches the one-step relative distance") {
  KnowledgeBase kb = cruise_kb();
  Pool pool = generate_pool(kb, 1, /*with_sums=*/true, {});
  // d covered relative to the front car over one step when the ego
  // accelerates and the front car brakes.
  ExprPtr body = parse_expr("a*t^2/2 + v*t");
  std::unordered_map<std::string, ExprPtr> sigma;
  sigma.emplace("a", normalize(parse_expr("a_dec - a_acc")));
  sigma.emplace("t", make_sym("t_1"));
  sigma.emplace("v", normalize(parse_expr("v_f - v_e")));
  std::string key = "d|" + expr_key(normalize(substitute(body, sigma)));
  CHECK(pool.index.count(key) == 1);
}

TEST_CASE("plain substitution reaches v_e/t_1 in the acceleration pool") {
  KnowledgeBase kb = cruise_kb();
  Pool pool = generate_pool(kb, 1, /*with_sums=*/false, {});
  std::string key = "a|" + expr_key(normalize(parse_expr("v_e/t_1")));
  REQUIRE(pool.index.count(key) == 1);
  size_t idx = pool.index.at(key);
  std::string trace = derivation_trace(pool, kb, idx);
  CHECK_THAT(trace, ContainsSubstring("(initial)"));
  CHECK_THAT(trace, ContainsSubstring("identity"));
  CHECK_THAT(trace, ContainsSubstring("v/t"));
}

TEST_CASE("one substitution round over the cruise base hits its frozen counts") {
  PoolReport rep;
  generate_pool(cruise_kb(), 1, /*with_sums=*/false, {}, &rep);
  CHECK(rep.initial == 9);
  CHECK(rep.sums_added == std::vector<size_t>{0});
  CHECK(rep.total_generated == 66);
  CHECK(rep.state_dependent == 42);
  CHECK(rep.numeric_unique == 42);
}

TEST_CASE("pairwise sums grow the one-round pool to its frozen size") {
  PoolReport rep;
  generate_pool(cruise_kb(), 1, /*with_sums=*/true, {}, &rep);
  CHECK(rep.sums_added == std::vector<size_t>{33});
  CHECK(rep.total_generated == 3653);
}

TEST_CASE("generate_pool throws once the pool outgrows its cap") {
  GenerateOptions opts;
  opts.max_entries = 20;
  bool thrown = false;
  try {
    generate_pool(cruise_kb(), 1, /*with_sums=*/true, opts);
  } catch (const pool_limit_error& e) {
    thrown = true;
    CHECK(e.partial.sums_added == std::vector<size_t>{33});
    CHECK(e.partial.identities_added.empty());
  }
  CHECK(thrown);
}

TEST_CASE("numeric uniqueness merges structurally distinct equal functions") {
  KnowledgeBase kb = kb_from(
      "quantity v t d\n"
      "const t_1 t 2\n"
      "var v_0 v\n"
      "identity d = v*t\n"
      "identity d = 2*v\n");
  PoolReport rep;
  generate_pool(kb, 1, /*with_sums=*/false, {}, &rep);
  CHECK(rep.total_generated == 2);   // v_0*t_1 and 2*v_0 are distinct shapes
  CHECK(rep.state_dependent == 2);
  CHECK(rep.numeric_unique == 1);    // but the same function once t_1 = 2
}

TEST_CASE("the admit hook filters new entries as they appear") {
  GenerateOptions opts;
  opts.admit = [](const Pool&, const PoolEntry& e) { return e.quantity == "a"; };
  PoolReport rep;
  Pool pool = generate_pool(cruise_kb(), 1, /*with_sums=*/false, opts, &rep);
  CHECK(rep.total_generated > 0);
  for (const auto& e : pool.entries) {
    if (e.iteration == 0) continue;
    CHECK(e.quantity == "a");
  }
}

TEST_CASE("pool_candidates scores pool expressions like axis variables") {
  KnowledgeBase kb = kb_from("quantity q\nvar x q\n");
  Pool pool = init_pools(kb);
  ControllerDataset ds = parse_controller_csv("x,action\n1,a\n2,a\n3,b\n4,b\n");
  PoolCandidateStats stats;
  auto cands = pool_candidates(pool, kb, DatasetView::full(ds), ImpurityKind::entropy, &stats);
  REQUIRE(cands.size() == 1);
  CHECK(stats.expressions_scored == 1);
  CHECK(cands[0].impurity == 0.0);
  CHECK(cands[0].generator == SplitGenerator::domain_kb);
  const auto* alg = std::get_if<AlgebraicPredicate>(&cands[0].pred);
  REQUIRE(alg != nullptr);
  CHECK(alg->threshold == 2.5);
  CHECK(evaluate_row(cands[0].pred, ds, 0));
  CHECK(evaluate_row(cands[0].pred, ds, 1));
  CHECK(!evaluate_row(cands[0].pred, ds, 2));
  CHECK(!evaluate_row(cands[0].pred, ds, 3));
}

TEST_CASE("pool_candidates skips constants and demands matching columns") {
  KnowledgeBase kb = kb_from("quantity q\nconst c q 5\nvar x q\n");
  Pool pool = init_pools(kb);
  ControllerDataset ds = parse_controller_csv("x,action\n1,a\n2,b\n");
  PoolCandidateStats stats;
  auto cands = pool_candidates(pool, kb, DatasetView::full(ds), ImpurityKind::entropy, &stats);
  CHECK(cands.size() == 1);
  CHECK(stats.expressions_skipped == 1);

  ControllerDataset other = parse_controller_csv("y,action\n1,a\n2,b\n");
  CHECK_THROWS_AS(pool_candidates(pool, kb, DatasetView::full(other), ImpurityKind::entropy),
                  std::invalid_argument);
}

TEST_CASE("pool_candidates drops non-finite rows from threshold selection") {
  KnowledgeBase kb = kb_from("quantity q r\nvar x q\nidentity r = 1/q\n");
  Pool pool = init_pools(kb);
  apply_identities(pool, kb, 1);
  ControllerDataset ds = parse_controller_csv("x,action\n-1,a\n0,a\n1,b\n2,b\n");
  PoolCandidateStats stats;
  auto cands = pool_candidates(pool, kb, DatasetView::full(ds), ImpurityKind::entropy, &stats);
  CHECK(stats.nonfinite_rows == 1);
  CHECK(!cands.empty());
}

TEST_CASE("best_pool_candidate prefers the lowest impurity") {
  KnowledgeBase kb = cruise_kb();
  Pool pool = generate_pool(kb, 1, /*with_sums=*/false, {});
  ControllerDataset ds = parse_controller_csv(
      "v_e,v_f,d_r,action\n0,0,1,a\n0,0,2,a\n0,0,9,b\n0,0,8,b\n");
  auto best = best_pool_candidate(pool, kb, DatasetView::full(ds), ImpurityKind::entropy);
  REQUIRE(best.has_value());
  CHECK(best->impurity == 0.0);
}
