#pragma once

#include <algorithm>
#include <chrono>
#include <optional>
#include <vector>

#include "polydt/dataset.hpp"
#include "polydt/domainkb.hpp"
#include "polydt/impurity.hpp"
#include "polydt/predicate.hpp"
#include "polydt/svm.hpp"

namespace polydt {

// Full binary decision tree over a controller dataset. Inner nodes hold a
// predicate (true goes left), leaves hold a label-table index. Nodes are
// stored in construction (preorder) order with node 0 as the root.
struct TreeNode {
  std::optional<Predicate> pred;
  uint32_t left = 0;
  uint32_t right = 0;
  int label = -1;
  bool impure = false;  // forced leaf whose view still mixed labels
  SplitGenerator generator = SplitGenerator::axis;

  bool is_leaf() const { return !pred.has_value(); }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  std::vector<std::string> variable_names;
  std::vector<std::string> action_names;
  std::vector<LabelSet> label_table;
  bool timed_out = false;
  bool depth_limited = false;
};

struct BuildConfig {
  ImpurityKind impurity = ImpurityKind::entropy;

  bool axis = true;
  double axis_priority = 1.0;
  bool linear = false;
  double linear_priority = 1.0;
  bool poly = false;
  double poly_priority = 1.0;
  bool domain = false;
  double domain_priority = 1.0;

  SvmConfig svm;
  bool prettify = true;

  // Both required when the domain generator is enabled.
  const Pool* kb_pool = nullptr;
  const KnowledgeBase* kb = nullptr;

  int max_depth = -1;  // negative = unlimited
  double timeout_seconds = 10800.0;
  size_t min_node_size = 1;
  int threads = 1;
};

inline void validate(const BuildConfig& cfg) {
  auto check_priority = [](double p, const char* name) {
    if (!(p > 0.0) || p > 1.0)
      throw std::invalid_argument(std::string("BuildConfig: ") + name +
                                  " priority must be in (0, 1]");
  };
  check_priority(cfg.axis_priority, "axis");
  check_priority(cfg.linear_priority, "linear");
  check_priority(cfg.poly_priority, "poly");
  check_priority(cfg.domain_priority, "domain");
  if (!cfg.axis && !cfg.linear && !cfg.poly && !cfg.domain)
    throw std::invalid_argument("BuildConfig: no split generator enabled");
  if (cfg.domain && (cfg.kb_pool == nullptr || cfg.kb == nullptr))
    throw std::invalid_argument("BuildConfig: domain generator needs a pool and knowledge base");
  if (cfg.threads < 1) throw std::invalid_argument("BuildConfig: threads must be >= 1");
}

// Best axis-aligned candidate over all variables: midpoint thresholds
// scored by the configured impurity. Ties prefer the lower variable index,
// then the lower threshold. Variables are scanned in parallel into
// index-addressed slots and reduced in index order, so the result does not
// depend on the thread count.
inline std::optional<SplitCandidate> axis_split_candidate(const DatasetView& view,
                                                          ImpurityKind kind, int threads) {
  if (view.empty()) return std::nullopt;
  const size_t m = view.data->num_vars();
  const size_t num_labels = view.data->label_table.size();

  std::vector<std::optional<ThresholdSplit>> per_feature(m);
  parallel_for(m, threads, [&](size_t j) {
    std::vector<double> values(view.size());
    std::vector<int> labels(view.size());
    for (size_t k = 0; k < view.size(); ++k) {
      values[k] = view.value(k, j);
      labels[k] = view.label_of(k);
    }
    per_feature[j] = best_threshold_split(std::move(values), std::move(labels), num_labels, kind);
  });

  std::optional<SplitCandidate> best;
  size_t best_feature = 0;
  for (size_t j = 0; j < m; ++j) {
    if (!per_feature[j]) continue;
    if (!best || per_feature[j]->score < best->impurity) {
      SplitCandidate cand;
      cand.pred = AxisPredicate{j, per_feature[j]->threshold};
      cand.impurity = per_feature[j]->score;
      cand.generator = SplitGenerator::axis;
      best = std::move(cand);
      best_feature = j;
    }
  }
  (void)best_feature;
  return best;
}

// Selection rule across generator proposals (one best candidate each, in
// generator order): a zero-impurity candidate wins outright, earliest
// generator first; otherwise the minimum of impurity / priority wins, ties
// again to the earliest. Scale-invariant in the priorities.
inline std::optional<size_t> pick_best_candidate(const std::vector<SplitCandidate>& candidates) {
  for (size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i].impurity == 0.0) return i;
  std::optional<size_t> best;
  double best_effective = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    double effective = candidates[i].impurity / candidates[i].priority;
    if (!best || effective < best_effective) {
      best = i;
      best_effective = effective;
    }
  }
  return best;
}

// Polls every enabled generator and applies the selection rule. Returns
// nullopt when no generator can split the view (then the caller makes the
// node a leaf).
inline std::optional<SplitCandidate> select_split(const DatasetView& view,
                                                  const BuildConfig& cfg) {
  std::vector<SplitCandidate> candidates;
  if (cfg.axis) {
    if (auto c = axis_split_candidate(view, cfg.impurity, cfg.threads)) {
      c->priority = cfg.axis_priority;
      candidates.push_back(std::move(*c));
    }
  }
  if (cfg.linear || cfg.poly) {
    SvmCandidateConfig scfg;
    scfg.svm = cfg.svm;
    scfg.impurity = cfg.impurity;
    scfg.prettify = cfg.prettify;
    if (cfg.linear) {
      if (auto c = svm_split_candidate(view, /*quadratic=*/false, scfg)) {
        c->priority = cfg.linear_priority;
        candidates.push_back(std::move(*c));
      }
    }
    if (cfg.poly) {
      if (auto c = svm_split_candidate(view, /*quadratic=*/true, scfg)) {
        c->priority = cfg.poly_priority;
        candidates.push_back(std::move(*c));
      }
    }
  }
  if (cfg.domain) {
    if (auto c = best_pool_candidate(*cfg.kb_pool, *cfg.kb, view, cfg.impurity)) {
      c->priority = cfg.domain_priority;
      candidates.push_back(std::move(*c));
    }
  }
  auto pick = pick_best_candidate(candidates);
  if (!pick) return std::nullopt;
  return std::move(candidates[*pick]);
}

namespace detail {

struct BuildContext {
  const BuildConfig* cfg;
  DecisionTree* tree;
  std::chrono::steady_clock::time_point deadline;
  bool out_of_time = false;
};

inline uint32_t build_node(BuildContext& ctx, const DatasetView& view, int depth) {
  DecisionTree& tree = *ctx.tree;
  uint32_t index = static_cast<uint32_t>(tree.nodes.size());
  tree.nodes.emplace_back();

  if (!ctx.out_of_time && std::chrono::steady_clock::now() >= ctx.deadline)
    ctx.out_of_time = true;

  bool pure = is_pure(view);
  bool depth_capped = ctx.cfg->max_depth >= 0 && depth >= ctx.cfg->max_depth;
  bool too_small = view.size() < ctx.cfg->min_node_size;

  std::optional<SplitCandidate> split;
  if (!pure && !depth_capped && !too_small && !ctx.out_of_time)
    split = select_split(view, *ctx.cfg);

  if (!split) {
    TreeNode& node = tree.nodes[index];
    node.label = modal_label(view);
    node.impure = !pure;
    if (node.impure) {
      if (ctx.out_of_time)
        tree.timed_out = true;
      else if (depth_capped)
        tree.depth_limited = true;
    }
    return index;
  }

  auto [left_view, right_view] = split_view(view, split->pred);
  if (left_view.empty() || right_view.empty()) {
    // Generators discard one-sided predicates, so this is a logic error in
    // a generator rather than a data problem.
    throw std::logic_error("build_tree: selected split leaves one side empty");
  }

  tree.nodes[index].pred = std::move(split->pred);
  tree.nodes[index].generator = split->generator;
  uint32_t left = build_node(ctx, left_view, depth + 1);
  tree.nodes[index].left = left;
  uint32_t right = build_node(ctx, right_view, depth + 1);
  tree.nodes[index].right = right;
  return index;
}

}  // namespace detail

// Greedy recursive construction. Pure views become leaves; views no
// generator can split, views at the depth cap, and all views pending when
// the timeout fires become leaves labeled with their most frequent label
// and flagged impure. The returned tree carries timed_out / depth_limited
// flags instead of throwing, so a partial result is always inspectable.
inline DecisionTree build_tree(const ControllerDataset& ds, const BuildConfig& cfg) {
  validate(cfg);
  if (ds.num_rows() == 0) throw std::invalid_argument("build_tree: empty dataset");

  DecisionTree tree;
  tree.variable_names = ds.variable_names;
  tree.action_names = ds.action_names;
  tree.label_table = ds.label_table;

  detail::BuildContext ctx;
  ctx.cfg = &cfg;
  ctx.tree = &tree;
  ctx.deadline = std::chrono::steady_clock::now() +
                 std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                     std::chrono::duration<double>(cfg.timeout_seconds));
  detail::build_node(ctx, DatasetView::full(ds), 0);
  return tree;
}

inline int predict_label(const DecisionTree& tree, std::span<const double> state) {
  uint32_t at = 0;
  while (!tree.nodes[at].is_leaf())
    at = evaluate(*tree.nodes[at].pred, state) ? tree.nodes[at].left : tree.nodes[at].right;
  return tree.nodes[at].label;
}

inline const LabelSet& predict_actions(const DecisionTree& tree, std::span<const double> state) {
  return tree.label_table[static_cast<size_t>(predict_label(tree, state))];
}

// Fraction of dataset rows whose predicted action set differs from the
// recorded one. Action ids are first-appearance indexes local to their
// container, so sets are compared by action name, which makes the check
// valid for imported trees and reordered datasets alike.
inline double verify_tree(const DecisionTree& tree, const ControllerDataset& ds) {
  if (ds.num_rows() == 0) throw std::invalid_argument("verify_tree: empty dataset");
  auto name_sets = [](const std::vector<LabelSet>& table, const std::vector<std::string>& names) {
    std::vector<std::vector<std::string>> out(table.size());
    for (size_t i = 0; i < table.size(); ++i) {
      for (int a : table[i].actions) out[i].push_back(names[static_cast<size_t>(a)]);
      std::sort(out[i].begin(), out[i].end());
    }
    return out;
  };
  const auto tree_sets = name_sets(tree.label_table, tree.action_names);
  const auto ds_sets = name_sets(ds.label_table, ds.action_names);
  size_t wrong = 0;
  std::vector<double> state(ds.num_vars());
  for (size_t i = 0; i < ds.num_rows(); ++i) {
    for (size_t j = 0; j < ds.num_vars(); ++j) state[j] = ds.columns[j][i];
    size_t predicted = static_cast<size_t>(predict_label(tree, state));
    if (tree_sets[predicted] != ds_sets[static_cast<size_t>(ds.row_labels[i])]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(ds.num_rows());
}

struct TreeStats {
  size_t total_nodes = 0;
  size_t inner_nodes = 0;
  size_t leaves = 0;
  size_t impure_leaves = 0;
  size_t depth = 0;  // single-node tree has depth 0
  size_t axis_splits = 0;
  size_t linear_splits = 0;
  size_t poly_splits = 0;
  size_t domain_splits = 0;
};

inline TreeStats tree_stats(const DecisionTree& tree) {
  TreeStats st;
  st.total_nodes = tree.nodes.size();
  struct Item {
    uint32_t node;
    size_t depth;
  };
  std::vector<Item> stack{{0, 0}};
  while (!stack.empty()) {
    auto [at, depth] = stack.back();
    stack.pop_back();
    st.depth = std::max(st.depth, depth);
    const TreeNode& node = tree.nodes[at];
    if (node.is_leaf()) {
      ++st.leaves;
      if (node.impure) ++st.impure_leaves;
      continue;
    }
    ++st.inner_nodes;
    switch (node.generator) {
      case SplitGenerator::axis: ++st.axis_splits; break;
      case SplitGenerator::svm_linear: ++st.linear_splits; break;
      case SplitGenerator::svm_poly: ++st.poly_splits; break;
      case SplitGenerator::domain_kb: ++st.domain_splits; break;
    }
    stack.push_back({node.left, depth + 1});
    stack.push_back({node.right, depth + 1});
  }
  return st;
}

}  // namespace polydt
