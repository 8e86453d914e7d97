#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "polydt/export.hpp"

using namespace polydt;
using Catch::Matchers::ContainsSubstring;

namespace {

DecisionTree small_axis_tree() {
  DecisionTree tree;
  tree.variable_names = {"x"};
  tree.action_names = {"a", "b"};
  tree.label_table = {LabelSet{{0}}, LabelSet{{1}}};
  TreeNode root;
  root.pred = AxisPredicate{0, 2.5};
  root.left = 1;
  root.right = 2;
  TreeNode left;
  left.label = 0;
  TreeNode right;
  right.label = 1;
  right.impure = true;
  tree.nodes = {root, left, right};
  return tree;
}

// One inner node of every predicate kind over (x, y).
DecisionTree all_kinds_tree() {
  DecisionTree tree;
  tree.variable_names = {"x", "y"};
  tree.action_names = {"a", "b"};
  tree.label_table = {LabelSet{{0}}, LabelSet{{0, 1}}, LabelSet{{1}}};

  TreeNode poly_root;
  PolynomialPredicate poly;
  poly.input_dims = 2;
  poly.coeffs = {6.0, -1.0, 0.0, -1.0, 0.0};
  poly.intercept = -5.5;
  poly_root.pred = poly;
  poly_root.left = 1;
  poly_root.right = 4;

  TreeNode lin_node;
  LinearPredicate lin;
  lin.coeffs = {1.0, -2.0};
  lin.threshold = 3.0;
  lin_node.pred = lin;
  lin_node.left = 2;
  lin_node.right = 3;

  TreeNode leaf_a;
  leaf_a.label = 0;
  TreeNode leaf_ab;
  leaf_ab.label = 1;

  TreeNode alg_node;
  AlgebraicPredicate alg;
  alg.bound = normalize(parse_expr("x*y"));
  alg.display = "x*y";
  alg.threshold = 5.0;
  alg.var_bindings = {{"x", 0}, {"y", 1}};
  alg_node.pred = alg;
  alg_node.left = 5;
  alg_node.right = 6;

  TreeNode leaf_b;
  leaf_b.label = 2;
  TreeNode leaf_ab2;
  leaf_ab2.label = 1;

  tree.nodes = {poly_root, lin_node, leaf_a, leaf_ab, alg_node, leaf_b, leaf_ab2};
  return tree;
}

std::vector<std::array<double, 2>> grid_states() {
  std::vector<std::array<double, 2>> states;
  for (double x = 0.0; x <= 4.0; x += 0.5)
    for (double y = 0.0; y <= 4.0; y += 0.5) states.push_back({x, y});
  return states;
}

}  // namespace

TEST_CASE("export_dot renders the frozen graph") {
  std::string expected =
      "digraph decision_tree {\n"
      "  node [shape=box];\n"
      "  n0 [label=\"x <= 2.5\"];\n"
      "  n0 -> n1 [label=\"True\"];\n"
      "  n0 -> n2 [label=\"False\", style=dashed];\n"
      "  n1 [label=\"{a}\"];\n"
      "  n2 [label=\"{b} (impure)\"];\n"
      "}\n";
  CHECK(export_dot(small_axis_tree()) == expected);
}

TEST_CASE("export_json emits the documented predicate forms") {
  ordered_json j = ordered_json::parse(export_json(all_kinds_tree()));
  CHECK(j["vars"] == std::vector<std::string>{"x", "y"});
  CHECK(j["actions"] == std::vector<std::string>{"a", "b"});

  const auto& root = j["root"]["pred"];
  CHECK(root["kind"] == "poly");
  CHECK(root["coeffs"]["x"] == 6.0);
  CHECK(root["coeffs"]["y"] == -1.0);
  CHECK(root["coeffs"]["x^2"] == -1.0);
  CHECK(root["coeffs"].size() == 3);  // zero terms are omitted
  CHECK(root["c"] == 5.5);

  const auto& lin = j["root"]["true"]["pred"];
  CHECK(lin["kind"] == "linear");
  CHECK(lin["coeffs"]["x"] == 1.0);
  CHECK(lin["coeffs"]["y"] == -2.0);
  CHECK(lin["c"] == 3.0);

  const auto& alg = j["root"]["false"]["pred"];
  CHECK(alg["kind"] == "alg");
  CHECK(alg["expr"] == "x*y");
  CHECK(alg["c"] == 5.0);

  const auto& leaf = j["root"]["true"]["true"]["leaf"];
  CHECK(leaf["actions"] == std::vector<int>{0});
}

TEST_CASE("axis predicates export as unit-coefficient rows") {
  ordered_json j = ordered_json::parse(export_json(small_axis_tree()));
  const auto& pred = j["root"]["pred"];
  CHECK(pred["kind"] == "axis");
  CHECK(pred["coeffs"]["x"] == 1.0);
  CHECK(pred["c"] == 2.5);
  CHECK(j["root"]["false"]["leaf"]["impure"] == true);
  CHECK(!j["root"]["true"]["leaf"].contains("impure"));
}

TEST_CASE("json export round-trips losslessly") {
  DecisionTree tree = all_kinds_tree();
  std::string text = export_json(tree);
  CHECK(export_json(tree) == text);  // determinism
  DecisionTree back = import_json(text);
  CHECK(export_json(back) == text);
  for (const auto& s : grid_states()) {
    CHECK(predict_actions(back, s) == predict_actions(tree, s));
  }
}

TEST_CASE("import accepts leaves in any label order") {
  // first leaf seen is {b}, so imported label ids differ from export order
  std::string text = R"({
    "vars": ["x"],
    "actions": ["a", "b"],
    "root": {
      "pred": {"kind": "axis", "coeffs": {"x": 1.0}, "c": 0.5},
      "true": {"leaf": {"actions": [1]}},
      "false": {"leaf": {"actions": [0, 1]}}
    }
  })";
  DecisionTree tree = import_json(text);
  REQUIRE(tree.label_table.size() == 2);
  std::vector<double> low{0.0}, high{1.0};
  CHECK(predict_actions(tree, low).actions == std::vector<int>{1});
  CHECK(predict_actions(tree, high).actions == std::vector<int>{0, 1});
}

TEST_CASE("import shares one label id between equal leaves") {
  std::string text = R"({
    "vars": ["x"],
    "actions": ["a"],
    "root": {
      "pred": {"kind": "axis", "coeffs": {"x": 1.0}, "c": 0.5},
      "true": {"leaf": {"actions": [0]}},
      "false": {"leaf": {"actions": [0]}}
    }
  })";
  DecisionTree tree = import_json(text);
  CHECK(tree.label_table.size() == 1);
}

TEST_CASE("import rejects malformed documents") {
  CHECK_THROWS_AS(import_json("not json"), parse_error);
  CHECK_THROWS_AS(import_json("{}"), parse_error);

  auto wrap = [](const std::string& pred) {
    return std::string(R"({"vars": ["x", "y"], "actions": ["a", "b"], "root": {"pred": )") +
           pred +
           R"(, "true": {"leaf": {"actions": [0]}}, "false": {"leaf": {"actions": [1]}}}})";
  };
  CHECK_THROWS_WITH(import_json(wrap(R"({"kind": "axis", "coeffs": {"z": 1.0}, "c": 0.0})")),
                    ContainsSubstring("unknown variable 'z'"));
  CHECK_THROWS_WITH(
      import_json(wrap(R"({"kind": "axis", "coeffs": {"x": 1.0, "y": 1.0}, "c": 0.0})")),
      ContainsSubstring("one coefficient"));
  CHECK_THROWS_WITH(import_json(wrap(R"({"kind": "poly", "coeffs": {"x^3": 1.0}, "c": 0.0})")),
                    ContainsSubstring("unknown monomial"));
  CHECK_THROWS_WITH(import_json(wrap(R"({"kind": "cubic", "coeffs": {"x": 1.0}, "c": 0.0})")),
                    ContainsSubstring("unknown predicate kind"));
  CHECK_THROWS_WITH(
      import_json(R"({"vars": ["x"], "actions": ["a"], "root": {"leaf": {"actions": [5]}}})"),
      ContainsSubstring("out of range"));
}

TEST_CASE("exported C compiles and reproduces the predictions") {
  DecisionTree tree = all_kinds_tree();
  auto states = grid_states();

  std::string src = export_c(tree);
  CHECK_THAT(src, ContainsSubstring("int predict(const double* state, int* actions_out)"));
  src += "\n#include <stdio.h>\n";
  src += "int main(void) {\n";
  src += "  double states[" + std::to_string(states.size()) + "][2] = {\n";
  for (const auto& s : states)
    src += "    {" + format_double(s[0]) + ", " + format_double(s[1]) + "},\n";
  src += "  };\n";
  src += "  for (int i = 0; i < " + std::to_string(states.size()) + "; ++i) {\n";
  src += "    int out[8];\n";
  src += "    int n = predict(states[i], out);\n";
  src += "    printf(\"%d\", n);\n";
  src += "    for (int k = 0; k < n; ++k) printf(\",%d\", out[k]);\n";
  src += "    printf(\"\\n\");\n";
  src += "  }\n";
  src += "  return 0;\n";
  src += "}\n";

  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "polydt_export_test";
  fs::create_directories(dir);
  fs::path c_path = dir / "controller.c";
  fs::path exe_path = dir / "controller";
  fs::path out_path = dir / "out.txt";
  {
    std::ofstream out(c_path);
    out << src;
  }
  std::string compile = "gcc -O0 -w -o " + exe_path.string() + " " + c_path.string() + " -lm";
  REQUIRE(std::system(compile.c_str()) == 0);
  std::string run = exe_path.string() + " > " + out_path.string();
  REQUIRE(std::system(run.c_str()) == 0);

  std::ifstream in(out_path);
  std::stringstream got;
  got << in.rdbuf();

  std::string expected;
  for (const auto& s : states) {
    const auto& actions = predict_actions(tree, s).actions;
    expected += std::to_string(actions.size());
    for (int a : actions) expected += "," + std::to_string(a);
    expected += "\n";
  }
  CHECK(got.str() == expected);
}
