#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "polydt/util.hpp"

namespace polydt {

// A set of allowed actions, stored as ascending indices into
// ControllerDataset::action_names. Never empty.
struct LabelSet {
  std::vector<int> actions;

  friend bool operator==(const LabelSet& a, const LabelSet& b) {
    return a.actions == b.actions;
  }
};

// Explicit permissive controller: one row per distinct state, each row
// labeled with the full set of actions the controller allows there.
// Values are stored column-major; rows keep their first-appearance order.
struct ControllerDataset {
  std::vector<std::string> variable_names;
  std::vector<std::string> action_names;
  std::vector<std::vector<double>> columns;  // [var][row]
  std::vector<int> row_labels;               // index into label_table
  std::vector<LabelSet> label_table;         // distinct action sets, first-occurrence order

  size_t num_rows() const { return row_labels.size(); }
  size_t num_vars() const { return variable_names.size(); }

  double value(size_t row, size_t var) const { return columns[var][row]; }

  std::vector<double> state(size_t row) const {
    std::vector<double> s(num_vars());
    for (size_t j = 0; j < num_vars(); ++j) s[j] = columns[j][row];
    return s;
  }
};

namespace detail {

// States are deduplicated on exact bit patterns, so -0.0 and 0.0 stay
// distinct and no epsilon is involved.
struct StateKeyHash {
  size_t operator()(const std::vector<double>& v) const {
    uint64_t h = 1469598103934665603ull;
    for (double d : v) {
      uint64_t bits;
      std::memcpy(&bits, &d, sizeof(bits));
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (i * 8)) & 0xff;
        h *= 1099511628211ull;
      }
    }
    return h;
  }
};

struct StateKeyEq {
  bool operator()(const std::vector<double>& a, const std::vector<double>& b) const {
    if (a.size() != b.size()) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  }
};

}  // namespace detail

// Parses the controller CSV exchange format:
//   header "name1,...,nameM,action", then one state/action pair per line.
// Pairs sharing a state are merged into one row whose label is the union
// of their actions. Lines starting with '#' and blank lines are skipped.
inline ControllerDataset parse_controller_csv(std::istream& in) {
  ControllerDataset ds;
  std::string line;

  // Header.
  size_t num_vars = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto cells = split(sv, ',');
    if (cells.size() < 2)
      throw parse_error("header must list at least one state variable and the action column");
    num_vars = cells.size() - 1;
    for (size_t j = 0; j < num_vars; ++j) {
      std::string name(trim(cells[j]));
      if (name.empty()) throw parse_error("empty variable name in header");
      ds.variable_names.push_back(std::move(name));
    }
    have_header = true;
    break;
  }
  if (!have_header) throw parse_error("empty input: no header line");

  std::unordered_map<std::vector<double>, size_t, detail::StateKeyHash, detail::StateKeyEq>
      state_index;
  std::unordered_map<std::string, int> action_index;
  std::vector<std::vector<int>> row_actions;  // per state, ascending unique
  ds.columns.resize(num_vars);

  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto cells = split(sv, ',');
    if (cells.size() != num_vars + 1)
      throw parse_error("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(num_vars + 1) + " cells, got " +
                        std::to_string(cells.size()));

    std::vector<double> state(num_vars);
    for (size_t j = 0; j < num_vars; ++j) {
      try {
        state[j] = parse_double(trim(cells[j]));
      } catch (const parse_error& e) {
        throw parse_error("line " + std::to_string(line_no) + ": " + e.what());
      }
      if (!std::isfinite(state[j]))
        throw parse_error("line " + std::to_string(line_no) + ": non-finite state value");
    }
    std::string action(trim(cells[num_vars]));
    if (action.empty())
      throw parse_error("line " + std::to_string(line_no) + ": empty action");

    int aid;
    if (auto it = action_index.find(action); it != action_index.end()) {
      aid = it->second;
    } else {
      aid = static_cast<int>(ds.action_names.size());
      action_index.emplace(action, aid);
      ds.action_names.push_back(action);
    }

    size_t row;
    if (auto it = state_index.find(state); it != state_index.end()) {
      row = it->second;
    } else {
      row = row_actions.size();
      state_index.emplace(state, row);
      row_actions.emplace_back();
      for (size_t j = 0; j < num_vars; ++j) ds.columns[j].push_back(state[j]);
    }
    auto& acts = row_actions[row];
    auto pos = std::lower_bound(acts.begin(), acts.end(), aid);
    if (pos == acts.end() || *pos != aid) acts.insert(pos, aid);
  }

  if (row_actions.empty()) throw parse_error("empty dataset: header but no data rows");

  // Label table in order of first occurrence of each distinct action set.
  std::map<std::vector<int>, int> label_index;
  ds.row_labels.resize(row_actions.size());
  for (size_t i = 0; i < row_actions.size(); ++i) {
    auto it = label_index.find(row_actions[i]);
    if (it == label_index.end()) {
      int lid = static_cast<int>(ds.label_table.size());
      label_index.emplace(row_actions[i], lid);
      ds.label_table.push_back(LabelSet{row_actions[i]});
      ds.row_labels[i] = lid;
    } else {
      ds.row_labels[i] = it->second;
    }
  }
  return ds;
}

inline ControllerDataset parse_controller_csv(const std::string& text) {
  std::istringstream in(text);
  return parse_controller_csv(in);
}

// Inverse of parse_controller_csv: one line per state/action pair, actions
// emitted in ascending index order. parse(serialize(ds)) reproduces ds.
inline void serialize_controller_csv(const ControllerDataset& ds, std::ostream& out) {
  for (size_t j = 0; j < ds.num_vars(); ++j) {
    out << ds.variable_names[j] << ',';
  }
  out << "action\n";
  for (size_t i = 0; i < ds.num_rows(); ++i) {
    const LabelSet& label = ds.label_table[ds.row_labels[i]];
    for (int aid : label.actions) {
      for (size_t j = 0; j < ds.num_vars(); ++j) {
        out << format_double(ds.columns[j][i]) << ',';
      }
      out << ds.action_names[aid] << '\n';
    }
  }
}

inline std::string serialize_controller_csv(const ControllerDataset& ds) {
  std::ostringstream out;
  serialize_controller_csv(ds, out);
  return out.str();
}

// A subset of dataset rows, the unit every split generator works on.
struct DatasetView {
  const ControllerDataset* data = nullptr;
  std::vector<uint32_t> rows;

  static DatasetView full(const ControllerDataset& ds) {
    DatasetView v;
    v.data = &ds;
    v.rows.resize(ds.num_rows());
    for (size_t i = 0; i < v.rows.size(); ++i) v.rows[i] = static_cast<uint32_t>(i);
    return v;
  }

  size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  int label_of(size_t k) const { return data->row_labels[rows[k]]; }
  double value(size_t k, size_t var) const { return data->columns[var][rows[k]]; }
};

// Splits a view by an arbitrary row test; rows passing go left.
template <typename RowPredicate>
std::pair<DatasetView, DatasetView> split_view_by(const DatasetView& view, RowPredicate&& test) {
  DatasetView left, right;
  left.data = right.data = view.data;
  for (uint32_t r : view.rows) {
    if (test(r))
      left.rows.push_back(r);
    else
      right.rows.push_back(r);
  }
  return {std::move(left), std::move(right)};
}

// Occurrence count of every label in the view, indexed by label id.
inline std::vector<size_t> label_counts(const DatasetView& view) {
  std::vector<size_t> counts(view.data->label_table.size(), 0);
  for (uint32_t r : view.rows) ++counts[view.data->row_labels[r]];
  return counts;
}

struct LabelStatistics {
  std::vector<size_t> counts;  // indexed by label id, zeros for absent labels
  size_t distinct = 0;
  size_t min_count = 0;  // smallest nonzero count
};

inline LabelStatistics label_statistics(const DatasetView& view) {
  LabelStatistics st;
  st.counts = label_counts(view);
  for (size_t c : st.counts) {
    if (c == 0) continue;
    ++st.distinct;
    if (st.min_count == 0 || c < st.min_count) st.min_count = c;
  }
  return st;
}

inline bool is_pure(const DatasetView& view) {
  if (view.empty()) return true;
  int first = view.label_of(0);
  for (size_t k = 1; k < view.size(); ++k)
    if (view.label_of(k) != first) return false;
  return true;
}

// Most frequent label in the view; ties resolved toward the label that
// entered the label table first.
inline int modal_label(const DatasetView& view) {
  if (view.empty()) throw std::invalid_argument("modal_label: empty view");
  auto counts = label_counts(view);
  size_t best = 0;
  bool found = false;
  size_t best_count = 0;
  for (size_t lid = 0; lid < counts.size(); ++lid) {
    if (counts[lid] > best_count) {
      best = lid;
      best_count = counts[lid];
      found = true;
    }
  }
  if (!found) throw std::invalid_argument("modal_label: empty view");
  return static_cast<int>(best);
}

// Any decision tree classifying all rows exactly needs one leaf per
// distinct label and, being full binary, one fewer inner node.
inline size_t min_tree_size(const ControllerDataset& ds) {
  return 2 * ds.label_table.size() - 1;
}

// Removes the given state variables, merging rows that become identical.
// Merging rows must agree on their label; the caller is expected to have
// established that (e.g. via the relevance screen).
inline ControllerDataset drop_variables(const ControllerDataset& ds,
                                        const std::vector<size_t>& removed) {
  std::vector<bool> remove(ds.num_vars(), false);
  for (size_t j : removed) {
    if (j >= ds.num_vars()) throw std::invalid_argument("drop_variables: index out of range");
    remove[j] = true;
  }
  ControllerDataset out;
  out.action_names = ds.action_names;
  out.label_table = ds.label_table;
  std::vector<size_t> kept;
  for (size_t j = 0; j < ds.num_vars(); ++j) {
    if (!remove[j]) {
      kept.push_back(j);
      out.variable_names.push_back(ds.variable_names[j]);
    }
  }
  if (kept.empty()) throw std::invalid_argument("drop_variables: all variables removed");

  out.columns.resize(kept.size());
  std::unordered_map<std::vector<double>, size_t, detail::StateKeyHash, detail::StateKeyEq>
      state_index;
  std::vector<double> state(kept.size());
  for (size_t i = 0; i < ds.num_rows(); ++i) {
    for (size_t j = 0; j < kept.size(); ++j) state[j] = ds.columns[kept[j]][i];
    auto it = state_index.find(state);
    if (it == state_index.end()) {
      state_index.emplace(state, out.row_labels.size());
      for (size_t j = 0; j < kept.size(); ++j) out.columns[j].push_back(state[j]);
      out.row_labels.push_back(ds.row_labels[i]);
    } else if (out.row_labels[it->second] != ds.row_labels[i]) {
      throw std::invalid_argument("drop_variables: removal merges rows with different labels");
    }
  }

  // The label table may now contain unused entries; keep it intact so label
  // ids stay comparable with the source dataset.
  return out;
}

}  // namespace polydt
