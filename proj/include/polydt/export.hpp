#pragma once

#include <json.hpp>
#include <map>
#include <sstream>
#include <string>

#include "polydt/tree.hpp"

namespace polydt {

using ordered_json = nlohmann::ordered_json;

// ---- DOT ---------------------------------------------------------------------

namespace detail {

inline std::string dot_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

inline std::string leaf_label(const DecisionTree& tree, const TreeNode& node) {
  std::string out = "{";
  const LabelSet& set = tree.label_table[static_cast<size_t>(node.label)];
  for (size_t i = 0; i < set.actions.size(); ++i) {
    if (i) out += ", ";
    out += tree.action_names[static_cast<size_t>(set.actions[i])];
  }
  out += "}";
  if (node.impure) out += " (impure)";
  return out;
}

}  // namespace detail

// Graphviz rendering: inner nodes show their predicate, leaves the allowed
// action set. The true branch is the left, solid edge; the false branch is
// dashed.
inline std::string export_dot(const DecisionTree& tree) {
  std::ostringstream out;
  out << "digraph decision_tree {\n";
  out << "  node [shape=box];\n";
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& node = tree.nodes[i];
    if (node.is_leaf()) {
      out << "  n" << i << " [label=\"" << detail::dot_escape(detail::leaf_label(tree, node))
          << "\"];\n";
    } else {
      out << "  n" << i << " [label=\""
          << detail::dot_escape(render(*node.pred, tree.variable_names)) << "\"];\n";
      out << "  n" << i << " -> n" << node.left << " [label=\"True\"];\n";
      out << "  n" << i << " -> n" << node.right << " [label=\"False\", style=dashed];\n";
    }
  }
  out << "}\n";
  return out.str();
}

// ---- JSON ---------------------------------------------------------------------

namespace detail {

inline ordered_json pred_to_json(const Predicate& pred, const DecisionTree& tree) {
  ordered_json j;
  if (const auto* axis = std::get_if<AxisPredicate>(&pred)) {
    j["kind"] = "axis";
    ordered_json coeffs;
    coeffs[tree.variable_names[axis->feature]] = 1.0;
    j["coeffs"] = coeffs;
    j["c"] = axis->threshold;
  } else if (const auto* lin = std::get_if<LinearPredicate>(&pred)) {
    j["kind"] = "linear";
    ordered_json coeffs;
    for (size_t i = 0; i < lin->coeffs.size(); ++i)
      if (lin->coeffs[i] != 0.0) coeffs[tree.variable_names[i]] = lin->coeffs[i];
    j["coeffs"] = coeffs;
    j["c"] = lin->threshold;
  } else if (const auto* poly = std::get_if<PolynomialPredicate>(&pred)) {
    j["kind"] = "poly";
    QuadraticMap map = QuadraticMap::for_dims(poly->input_dims);
    ordered_json coeffs;
    for (size_t d = 0; d < map.output_dims(); ++d)
      if (poly->coeffs[d] != 0.0)
        coeffs[map.monomial_name(d, tree.variable_names)] = poly->coeffs[d];
    j["coeffs"] = coeffs;
    // Uniform "sum(coeffs * term) <= c" reading: move the intercept to the
    // right-hand side.
    j["c"] = -poly->intercept;
  } else {
    const auto& alg = std::get<AlgebraicPredicate>(pred);
    j["kind"] = "alg";
    j["expr"] = render_expr(alg.bound);
    j["display"] = alg.display;
    j["c"] = alg.threshold;
  }
  return j;
}

inline ordered_json node_to_json(const DecisionTree& tree, uint32_t at) {
  const TreeNode& node = tree.nodes[at];
  ordered_json j;
  if (node.is_leaf()) {
    ordered_json leaf;
    leaf["actions"] = tree.label_table[static_cast<size_t>(node.label)].actions;
    if (node.impure) leaf["impure"] = true;
    j["leaf"] = leaf;
    return j;
  }
  j["pred"] = pred_to_json(*node.pred, tree);
  j["true"] = node_to_json(tree, node.left);
  j["false"] = node_to_json(tree, node.right);
  return j;
}

}  // namespace detail

inline std::string export_json(const DecisionTree& tree) {
  ordered_json j;
  j["vars"] = tree.variable_names;
  j["actions"] = tree.action_names;
  j["root"] = detail::node_to_json(tree, 0);
  return j.dump(2) + "\n";
}

namespace detail {

inline Predicate pred_from_json(const ordered_json& j,
                                const std::vector<std::string>& vars) {
  auto var_index = [&](const std::string& name) -> size_t {
    for (size_t i = 0; i < vars.size(); ++i)
      if (vars[i] == name) return i;
    throw parse_error("tree json: unknown variable '" + name + "'");
  };
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "axis") {
    const auto& coeffs = j.at("coeffs");
    if (coeffs.size() != 1) throw parse_error("tree json: axis predicate needs one coefficient");
    AxisPredicate p;
    p.feature = var_index(coeffs.begin().key());
    p.threshold = j.at("c").get<double>();
    return p;
  }
  if (kind == "linear") {
    LinearPredicate p;
    p.coeffs.assign(vars.size(), 0.0);
    for (auto it = j.at("coeffs").begin(); it != j.at("coeffs").end(); ++it)
      p.coeffs[var_index(it.key())] = it.value().get<double>();
    p.threshold = j.at("c").get<double>();
    return p;
  }
  if (kind == "poly") {
    PolynomialPredicate p;
    p.input_dims = vars.size();
    QuadraticMap map = QuadraticMap::for_dims(vars.size());
    p.coeffs.assign(map.output_dims(), 0.0);
    for (auto it = j.at("coeffs").begin(); it != j.at("coeffs").end(); ++it) {
      bool found = false;
      for (size_t d = 0; d < map.output_dims(); ++d) {
        if (map.monomial_name(d, vars) == it.key()) {
          p.coeffs[d] = it.value().get<double>();
          found = true;
          break;
        }
      }
      if (!found) throw parse_error("tree json: unknown monomial '" + it.key() + "'");
    }
    p.intercept = -j.at("c").get<double>();
    return p;
  }
  if (kind == "alg") {
    AlgebraicPredicate p;
    p.bound = normalize(parse_expr(j.at("expr").get<std::string>()));
    p.display = j.value("display", j.at("expr").get<std::string>());
    p.threshold = j.at("c").get<double>();
    for (const auto& name : expr_symbols(p.bound))
      p.var_bindings.emplace_back(name, var_index(name));
    return p;
  }
  throw parse_error("tree json: unknown predicate kind '" + kind + "'");
}

inline uint32_t node_from_json(const ordered_json& j, DecisionTree& tree,
                               std::map<std::vector<int>, int>& label_index) {
  uint32_t index = static_cast<uint32_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("leaf")) {
    std::vector<int> actions = j.at("leaf").at("actions").get<std::vector<int>>();
    for (int a : actions)
      if (a < 0 || static_cast<size_t>(a) >= tree.action_names.size())
        throw parse_error("tree json: action index out of range");
    auto it = label_index.find(actions);
    int label;
    if (it == label_index.end()) {
      label = static_cast<int>(tree.label_table.size());
      label_index.emplace(actions, label);
      tree.label_table.push_back(LabelSet{actions});
    } else {
      label = it->second;
    }
    tree.nodes[index].label = label;
    tree.nodes[index].impure = j.at("leaf").value("impure", false);
    return index;
  }
  tree.nodes[index].pred = pred_from_json(j.at("pred"), tree.variable_names);
  uint32_t left = node_from_json(j.at("true"), tree, label_index);
  tree.nodes[index].left = left;
  uint32_t right = node_from_json(j.at("false"), tree, label_index);
  tree.nodes[index].right = right;
  return index;
}

}  // namespace detail

// Round-trips with export_json: import(export(t)) evaluates identically
// and re-exports to identical bytes.
inline DecisionTree import_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error(std::string("tree json: ") + e.what());
  }
  DecisionTree tree;
  try {
    tree.variable_names = j.at("vars").get<std::vector<std::string>>();
    tree.action_names = j.at("actions").get<std::vector<std::string>>();
    std::map<std::vector<int>, int> label_index;
    detail::node_from_json(j.at("root"), tree, label_index);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("tree json: ") + e.what());
  }
  return tree;
}

// ---- C ------------------------------------------------------------------------

namespace detail {

inline std::string pred_to_c(const Predicate& pred) {
  std::string out;
  if (const auto* axis = std::get_if<AxisPredicate>(&pred)) {
    out = "state[" + std::to_string(axis->feature) + "] <= " + format_double(axis->threshold);
  } else if (const auto* lin = std::get_if<LinearPredicate>(&pred)) {
    std::string lhs;
    for (size_t i = 0; i < lin->coeffs.size(); ++i) {
      if (lin->coeffs[i] == 0.0) continue;
      if (!lhs.empty()) lhs += " + ";
      lhs += format_double(lin->coeffs[i]) + "*state[" + std::to_string(i) + "]";
    }
    if (lhs.empty()) lhs = "0.0";
    out = lhs + " <= " + format_double(lin->threshold);
  } else if (const auto* poly = std::get_if<PolynomialPredicate>(&pred)) {
    QuadraticMap map = QuadraticMap::for_dims(poly->input_dims);
    std::string lhs;
    for (size_t d = 0; d < map.output_dims(); ++d) {
      if (poly->coeffs[d] == 0.0) continue;
      if (!lhs.empty()) lhs += " + ";
      const auto& mono = map.monomials[d];
      lhs += format_double(poly->coeffs[d]) + "*state[" + std::to_string(mono.i) + "]";
      if (mono.degree == 2) lhs += "*state[" + std::to_string(mono.j) + "]";
    }
    if (poly->intercept != 0.0 || lhs.empty()) {
      if (!lhs.empty()) lhs += " + ";
      lhs += format_double(poly->intercept);
    }
    out = lhs + " <= 0.0";
  } else {
    const auto& alg = std::get<AlgebraicPredicate>(pred);
    std::unordered_map<std::string, ExprPtr> to_slots;
    for (const auto& [name, idx] : alg.var_bindings)
      to_slots.emplace(name, make_sym("state[" + std::to_string(idx) + "]"));
    out = render_expr(substitute(alg.bound, to_slots), /*c_syntax=*/true) +
          " <= " + format_double(alg.threshold);
  }
  return "(" + out + ")";
}

inline void node_to_c(const DecisionTree& tree, uint32_t at, int indent, std::string& out) {
  std::string pad(static_cast<size_t>(indent) * 2, ' ');
  const TreeNode& node = tree.nodes[at];
  if (node.is_leaf()) {
    const LabelSet& set = tree.label_table[static_cast<size_t>(node.label)];
    for (size_t i = 0; i < set.actions.size(); ++i)
      out += pad + "actions_out[" + std::to_string(i) +
             "] = " + std::to_string(set.actions[i]) + ";\n";
    out += pad + "return " + std::to_string(set.actions.size()) + ";\n";
    return;
  }
  out += pad + "if " + pred_to_c(*node.pred) + " {\n";
  node_to_c(tree, node.left, indent + 1, out);
  out += pad + "} else {\n";
  node_to_c(tree, node.right, indent + 1, out);
  out += pad + "}\n";
}

}  // namespace detail

// Standalone C translation unit. predict() fills actions_out with the
// action indices allowed at `state` and returns how many there are.
// actions_out must have room for one index per action.
inline std::string export_c(const DecisionTree& tree) {
  std::string out;
  out += "/* Generated decision-tree controller.\n";
  out += " * state:";
  for (size_t j = 0; j < tree.variable_names.size(); ++j)
    out += std::string(j ? "," : "") + " state[" + std::to_string(j) + "] = " +
           tree.variable_names[j];
  out += "\n * actions:";
  for (size_t a = 0; a < tree.action_names.size(); ++a)
    out += std::string(a ? "," : "") + " " + std::to_string(a) + " = " + tree.action_names[a];
  out += "\n */\n";
  out += "#include <math.h>\n\n";
  out += "int predict(const double* state, int* actions_out) {\n";
  detail::node_to_c(tree, 0, 1, out);
  out += "}\n";
  return out;
}

}  // namespace polydt
