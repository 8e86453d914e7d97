#pragma once

#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "polydt/dataset.hpp"
#include "polydt/expr.hpp"
#include "polydt/predicate.hpp"
#include "polydt/svm.hpp"

namespace polydt {

// ---- knowledge base ---------------------------------------------------------

// a physical quantity name ("d", "v", "a", "t", ...) typed onto symbols
// and identities. Symbols are either named constants with a fixed value or
// state variables matched by name against dataset columns.
struct KbSymbol {
  std::string name;
  std::string quantity;
  bool is_constant = false;
  double value = 0.0;  // constants only
};

struct KbIdentity {
  std::string target_quantity;
  ExprPtr body;  // leaves are quantity names
  std::string source_text;
};

struct KnowledgeBase {
  std::vector<std::string> quantities;
  std::vector<KbSymbol> symbols;
  std::vector<KbIdentity> identities;

  bool has_quantity(const std::string& q) const {
    for (const auto& known : quantities)
      if (known == q) return true;
    return false;
  }

  std::unordered_map<std::string, double> constant_values() const {
    std::unordered_map<std::string, double> out;
    for (const auto& s : symbols)
      if (s.is_constant) out.emplace(s.name, s.value);
    return out;
  }

  std::vector<std::string> variable_names() const {
    std::vector<std::string> out;
    for (const auto& s : symbols)
      if (!s.is_constant) out.push_back(s.name);
    return out;
  }
};

// Text format, one directive per line ('#' comments allowed):
//   quantity d v a t
//   const d_safe d 5
//   var v_e v
//   identity a = 2*(d - t*v)/t^2
// Identity bodies reference quantity names only.
inline KnowledgeBase parse_kb(std::istream& in) {
  KnowledgeBase kb;
  std::set<std::string> names;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    std::istringstream ls{std::string(sv)};
    std::string head;
    ls >> head;
    auto fail = [&](const std::string& what) {
      throw parse_error("kb line " + std::to_string(line_no) + ": " + what);
    };
    if (head == "quantity") {
      std::string q;
      while (ls >> q) {
        if (kb.has_quantity(q)) fail("duplicate quantity '" + q + "'");
        kb.quantities.push_back(q);
      }
      if (kb.quantities.empty()) fail("quantity line lists nothing");
    } else if (head == "const" || head == "var") {
      KbSymbol sym;
      sym.is_constant = head == "const";
      if (!(ls >> sym.name >> sym.quantity)) fail("expected name and quantity");
      if (!kb.has_quantity(sym.quantity)) fail("unknown quantity '" + sym.quantity + "'");
      if (!names.insert(sym.name).second) fail("duplicate symbol '" + sym.name + "'");
      if (sym.is_constant) {
        std::string value;
        if (!(ls >> value)) fail("constant needs a value");
        sym.value = parse_double(value);
      }
      kb.symbols.push_back(std::move(sym));
    } else if (head == "identity") {
      std::string rest;
      std::getline(ls, rest);
      size_t eq = rest.find('=');
      if (eq == std::string::npos) fail("identity needs '='");
      std::string target(trim(std::string_view(rest).substr(0, eq)));
      if (!kb.has_quantity(target)) fail("unknown target quantity '" + target + "'");
      KbIdentity id;
      id.target_quantity = target;
      id.source_text = std::string(trim(std::string_view(rest).substr(eq + 1)));
      id.body = parse_expr(id.source_text);
      for (const auto& s : expr_symbols(id.body))
        if (!kb.has_quantity(s)) fail("identity body uses non-quantity symbol '" + s + "'");
      kb.identities.push_back(std::move(id));
    } else {
      fail("unknown directive '" + head + "'");
    }
  }
  return kb;
}

inline KnowledgeBase parse_kb_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open knowledge base file: " + path);
  return parse_kb(in);
}

// ---- expression pools -------------------------------------------------------

enum class PoolOrigin { initial, sum, difference, identity };

struct PoolEntry {
  ExprPtr expr;  // symbolic, normalized
  std::string quantity;
  int iteration = 0;
  PoolOrigin origin = PoolOrigin::initial;
  size_t identity_index = 0;           // origin == identity
  std::vector<size_t> parents;         // pool indices this entry was built from
};

// Per-quantity value pools with structural deduplication. The same shape
// may legitimately live in two different quantity pools, so the dedup key
// is (quantity, canonical form).
struct Pool {
  std::vector<PoolEntry> entries;
  std::unordered_map<std::string, size_t> index;  // quantity + '|' + expr_key

  size_t size() const { return entries.size(); }

  const std::vector<size_t>& of_quantity(const std::string& q) const {
    static const std::vector<size_t> empty;
    auto it = by_quantity.find(q);
    return it == by_quantity.end() ? empty : it->second;
  }

  // Returns the entry index, inserting if the shape is new for the
  // quantity. Expressions normalizing to exactly 0 are rejected.
  std::optional<size_t> insert(PoolEntry entry) {
    if (entry.expr->kind == ExprKind::num && entry.expr->value == 0.0) return std::nullopt;
    std::string key = entry.quantity + '|' + expr_key(entry.expr);
    auto it = index.find(key);
    if (it != index.end()) return std::nullopt;
    size_t idx = entries.size();
    index.emplace(std::move(key), idx);
    by_quantity[entry.quantity].push_back(idx);
    entries.push_back(std::move(entry));
    return idx;
  }

  std::unordered_map<std::string, std::vector<size_t>> by_quantity;
};

inline Pool init_pools(const KnowledgeBase& kb) {
  Pool pool;
  for (const auto& sym : kb.symbols) {
    PoolEntry e;
    e.expr = make_sym(sym.name);
    e.quantity = sym.quantity;
    e.iteration = 0;
    e.origin = PoolOrigin::initial;
    pool.insert(std::move(e));
  }
  return pool;
}

// One pass of pairwise sums and differences within each quantity pool.
// Pairs are ordered and include self-pairs, drawn from a snapshot of the
// pool at entry, so x+y and y+x merge structurally while x-y and y-x stay
// distinct and x-x cancels to 0 and is dropped. Returns the number of new
// entries.
inline size_t expand_sums(Pool& pool, int iteration) {
  size_t snapshot = pool.entries.size();
  size_t added = 0;
  for (size_t a = 0; a < snapshot; ++a) {
    for (size_t b = 0; b < snapshot; ++b) {
      if (pool.entries[a].quantity != pool.entries[b].quantity) continue;
      for (bool negate : {false, true}) {
        PoolEntry e;
        e.quantity = pool.entries[a].quantity;
        e.iteration = iteration;
        e.origin = negate ? PoolOrigin::difference : PoolOrigin::sum;
        e.parents = {a, b};
        ExprPtr rhs = negate ? make_neg(pool.entries[b].expr) : pool.entries[b].expr;
        e.expr = normalize(make_add({pool.entries[a].expr, rhs}));
        if (pool.insert(std::move(e))) ++added;
      }
    }
  }
  return added;
}

// One pass of total substitutions: every identity is instantiated with
// every combination of pool values for the quantities in its body (the
// same quantity symbol receives the same value everywhere it occurs).
// Pools are snapshot at entry; results land in the identity's target pool.
inline size_t apply_identities(Pool& pool, const KnowledgeBase& kb, int iteration) {
  struct Snapshot {
    std::vector<std::string> quantities;       // body quantities, kb order
    std::vector<std::vector<size_t>> choices;  // matching pool indices
  };
  size_t added = 0;
  // Snapshot once: all identities substitute from the same pool state.
  std::unordered_map<std::string, std::vector<size_t>> pools_now = pool.by_quantity;

  for (size_t id_idx = 0; id_idx < kb.identities.size(); ++id_idx) {
    const KbIdentity& identity = kb.identities[id_idx];
    std::set<std::string> body_syms = expr_symbols(identity.body);
    Snapshot snap;
    bool feasible = true;
    for (const auto& q : kb.quantities) {
      if (!body_syms.count(q)) continue;
      auto it = pools_now.find(q);
      if (it == pools_now.end() || it->second.empty()) {
        feasible = false;
        break;
      }
      snap.quantities.push_back(q);
      snap.choices.push_back(it->second);
    }
    if (!feasible || snap.quantities.empty()) continue;

    std::vector<size_t> odometer(snap.quantities.size(), 0);
    while (true) {
      std::unordered_map<std::string, ExprPtr> sigma;
      PoolEntry e;
      for (size_t k = 0; k < snap.quantities.size(); ++k) {
        size_t pick = snap.choices[k][odometer[k]];
        sigma.emplace(snap.quantities[k], pool.entries[pick].expr);
        e.parents.push_back(pick);
      }
      e.quantity = identity.target_quantity;
      e.iteration = iteration;
      e.origin = PoolOrigin::identity;
      e.identity_index = id_idx;
      e.expr = normalize(substitute(identity.body, sigma));
      if (pool.insert(std::move(e))) ++added;

      size_t k = snap.quantities.size();
      while (k > 0) {
        --k;
        if (++odometer[k] < snap.choices[k].size()) break;
        odometer[k] = 0;
        if (k == 0) goto identity_done;
      }
    }
  identity_done:;
  }
  return added;
}

struct PoolReport {
  size_t initial = 0;
  std::vector<size_t> sums_added;        // per iteration (0 entries when sums disabled)
  std::vector<size_t> identities_added;  // per iteration
  size_t total_generated = 0;            // structurally distinct, excluding initial entries
  size_t state_dependent = 0;            // generated entries that depend on a state variable
  size_t numeric_unique = 0;             // state-dependent ones distinct as functions
};

struct GenerateOptions {
  size_t max_entries = 1'000'000;
  int numeric_bindings = 64;
  uint64_t numeric_seed = 0x5eedULL;
  double binding_range = 10.0;
  // Optional admission filter applied to each new entry (used to replay
  // published derivations on a restricted intermediate set). Rejected
  // entries are removed again before the next step.
  std::function<bool(const Pool&, const PoolEntry&)> admit;
};

struct pool_limit_error : std::runtime_error {
  PoolReport partial;
  explicit pool_limit_error(PoolReport report)
      : std::runtime_error("expression pool exceeded the configured size limit"),
        partial(std::move(report)) {}
};

namespace detail {

// Rebuilds pool indexes after filtering entries; keep_set holds surviving
// entry indices in ascending order.
inline void filter_pool(Pool& pool, const std::vector<bool>& keep) {
  Pool next;
  std::vector<size_t> remap(pool.entries.size(), SIZE_MAX);
  for (size_t i = 0; i < pool.entries.size(); ++i) {
    if (!keep[i]) continue;
    PoolEntry e = pool.entries[i];
    std::vector<size_t> parents;
    for (size_t p : e.parents)
      if (remap[p] != SIZE_MAX) parents.push_back(remap[p]);
    e.parents = std::move(parents);
    auto idx = next.insert(std::move(e));
    if (idx) remap[i] = *idx;
  }
  pool = std::move(next);
}

inline std::string numeric_signature(const ExprPtr& bound,
                                     const std::vector<std::string>& var_names,
                                     const std::vector<std::vector<double>>& bindings) {
  std::string sig;
  std::unordered_map<std::string, double> env;
  for (const auto& binding : bindings) {
    env.clear();
    for (size_t v = 0; v < var_names.size(); ++v) env.emplace(var_names[v], binding[v]);
    double value = eval(bound, env);
    if (std::isnan(value)) {
      sig += "nan;";
      continue;
    }
    // Round to 9 significant digits so algebraically equal forms that
    // differ only in floating-point association merge.
    std::ostringstream os;
    os.precision(9);
    os << value << ';';
    sig += os.str();
  }
  return sig;
}

}  // namespace detail

// Runs `iterations` rounds of (optional) pairwise sums followed by total
// identity substitution over cumulative pools, reporting how many new
// structurally distinct expressions each step produced, plus how many of
// all generated expressions are state-dependent and numerically distinct
// once constants take their knowledge-base values. Throws pool_limit_error
// (carrying the partial report) when the pool outgrows the limit.
inline Pool generate_pool(const KnowledgeBase& kb, int iterations, bool with_sums,
                          const GenerateOptions& options, PoolReport* report_out = nullptr) {
  Pool pool = init_pools(kb);
  PoolReport report;
  report.initial = pool.size();

  auto apply_admit = [&](size_t first_new) {
    if (!options.admit) return;
    std::vector<bool> keep(pool.entries.size(), true);
    size_t dropped = 0;
    for (size_t i = first_new; i < pool.entries.size(); ++i) {
      if (!options.admit(pool, pool.entries[i])) {
        keep[i] = false;
        ++dropped;
      }
    }
    if (dropped > 0) detail::filter_pool(pool, keep);
  };

  for (int it = 1; it <= iterations; ++it) {
    if (with_sums) {
      size_t before = pool.entries.size();
      size_t added = expand_sums(pool, it);
      apply_admit(before);
      report.sums_added.push_back(options.admit ? pool.entries.size() - before : added);
    } else {
      report.sums_added.push_back(0);
    }
    if (pool.size() > options.max_entries) throw pool_limit_error(report);

    size_t before = pool.entries.size();
    size_t added = apply_identities(pool, kb, it);
    apply_admit(before);
    report.identities_added.push_back(options.admit ? pool.entries.size() - before : added);
    if (pool.size() > options.max_entries) throw pool_limit_error(report);
  }

  report.total_generated = pool.size() >= report.initial ? pool.size() - report.initial : 0;

  // Numeric uniqueness over generated, state-dependent expressions.
  auto constants = kb.constant_values();
  auto var_names = kb.variable_names();
  std::mt19937_64 rng(options.numeric_seed);
  std::uniform_real_distribution<double> dist(-options.binding_range, options.binding_range);
  std::vector<std::vector<double>> bindings(static_cast<size_t>(options.numeric_bindings));
  for (auto& b : bindings) {
    b.resize(var_names.size());
    for (double& v : b) v = dist(rng);
  }
  std::unordered_set<std::string> signatures;
  for (const auto& entry : pool.entries) {
    if (entry.iteration == 0) continue;
    ExprPtr bound = bind_constants(entry.expr, constants);
    if (is_constant_expr(bound)) continue;
    ++report.state_dependent;
    signatures.insert(detail::numeric_signature(bound, var_names, bindings));
  }
  report.numeric_unique = signatures.size();

  if (report_out) *report_out = report;
  return pool;
}

// Human-readable derivation trace for one pool entry.
inline std::string derivation_trace(const Pool& pool, const KnowledgeBase& kb, size_t index) {
  const PoolEntry& e = pool.entries[index];
  std::string line = "#" + std::to_string(index) + " [" + e.quantity + "] " +
                     render_expr(e.expr);
  switch (e.origin) {
    case PoolOrigin::initial:
      line += "  (initial)";
      break;
    case PoolOrigin::sum:
      line += "  (sum of #" + std::to_string(e.parents[0]) + ", #" +
              std::to_string(e.parents[1]) + ")";
      break;
    case PoolOrigin::difference:
      line += "  (difference of #" + std::to_string(e.parents[0]) + ", #" +
              std::to_string(e.parents[1]) + ")";
      break;
    case PoolOrigin::identity: {
      line += "  (identity " + kb.identities[e.identity_index].target_quantity + " = " +
              kb.identities[e.identity_index].source_text + " applied to";
      for (size_t p : e.parents) line += " #" + std::to_string(p);
      line += ")";
      break;
    }
  }
  std::string out;
  for (size_t p : e.parents) out += derivation_trace(pool, kb, p) + "\n";
  return out + line;
}

// ---- split candidates from pool expressions ----------------------------------

struct PoolCandidateStats {
  size_t expressions_scored = 0;
  size_t expressions_skipped = 0;  // constant on the view or too few finite values
  size_t nonfinite_rows = 0;
};

// Scores every state-dependent pool expression on the view like an axis
// variable: evaluate per row, enumerate midpoint thresholds, keep the best
// one per expression. Rows evaluating to non-finite values are left out of
// threshold selection; the final impurity is computed on the real split the
// predicate induces (non-finite comparisons land on the false side).
inline std::vector<SplitCandidate> pool_candidates(const Pool& pool, const KnowledgeBase& kb,
                                                   const DatasetView& view, ImpurityKind kind,
                                                   PoolCandidateStats* stats = nullptr) {
  if (view.empty()) throw std::invalid_argument("pool_candidates: empty view");
  const auto& ds = *view.data;

  std::vector<std::pair<std::string, size_t>> bindings;
  for (const auto& name : kb.variable_names()) {
    bool found = false;
    for (size_t j = 0; j < ds.num_vars(); ++j) {
      if (ds.variable_names[j] == name) {
        bindings.emplace_back(name, j);
        found = true;
        break;
      }
    }
    if (!found)
      throw std::invalid_argument("pool_candidates: dataset has no variable named '" + name +
                                  "'");
  }

  auto constants = kb.constant_values();
  size_t num_labels = ds.label_table.size();

  std::vector<SplitCandidate> out;
  std::vector<double> values;
  std::vector<int> labels;
  std::unordered_map<std::string, double> env;

  for (size_t idx = 0; idx < pool.entries.size(); ++idx) {
    const PoolEntry& entry = pool.entries[idx];
    ExprPtr bound = bind_constants(entry.expr, constants);
    if (is_constant_expr(bound)) {
      if (stats) ++stats->expressions_skipped;
      continue;
    }

    values.clear();
    labels.clear();
    size_t nonfinite = 0;
    for (size_t k = 0; k < view.size(); ++k) {
      env.clear();
      for (const auto& [name, j] : bindings) env.emplace(name, view.value(k, j));
      double v = eval(bound, env);
      if (!std::isfinite(v)) {
        ++nonfinite;
        continue;
      }
      values.push_back(v);
      labels.push_back(view.label_of(k));
    }
    if (stats) stats->nonfinite_rows += nonfinite;

    auto split = best_threshold_split(values, labels, num_labels, kind);
    if (!split) {
      if (stats) ++stats->expressions_skipped;
      continue;
    }

    AlgebraicPredicate pred;
    pred.bound = bound;
    pred.threshold = split->threshold;
    pred.display = render_expr(entry.expr);
    pred.var_bindings = bindings;

    Predicate p = std::move(pred);
    auto [left, right] = split_view(view, p);
    if (left.empty() || right.empty()) {
      if (stats) ++stats->expressions_skipped;
      continue;
    }
    double score = split_score(kind, label_counts(left), label_counts(right));

    SplitCandidate cand;
    cand.pred = std::move(p);
    cand.impurity = score;
    cand.generator = SplitGenerator::domain_kb;
    out.push_back(std::move(cand));
    if (stats) ++stats->expressions_scored;
  }
  return out;
}

// Best pool candidate for a node, ties resolved toward the expression
// generated earlier.
inline std::optional<SplitCandidate> best_pool_candidate(const Pool& pool,
                                                         const KnowledgeBase& kb,
                                                         const DatasetView& view,
                                                         ImpurityKind kind,
                                                         PoolCandidateStats* stats = nullptr) {
  std::optional<SplitCandidate> best;
  for (auto& cand : pool_candidates(pool, kb, view, kind, stats)) {
    if (!best || cand.impurity < best->impurity) best = std::move(cand);
  }
  return best;
}

}  // namespace polydt
