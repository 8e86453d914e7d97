#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "polydt/dataset.hpp"
#include "polydt/expr.hpp"
#include "polydt/featuremap.hpp"
#include "polydt/impurity.hpp"

namespace polydt {

// Split predicates. Every kind evaluates to true-or-false on a state and
// routes boundary states (exact equality) to the true branch, which by
// convention is the left child.

struct AxisPredicate {
  size_t feature = 0;
  double threshold = 0.0;  // state[feature] <= threshold
};

struct LinearPredicate {
  std::vector<double> coeffs;  // sum_i coeffs[i] * state[i] <= threshold
  double threshold = 0.0;
};

// Quadratic polynomial over the explicit feature map of `input_dims`
// state variables, stored in "p(x) <= 0" form:
//   sum_d coeffs[d] * phi_d(state) + intercept <= 0.
struct PolynomialPredicate {
  size_t input_dims = 0;
  std::vector<double> coeffs;
  double intercept = 0.0;
};

// Derived algebraic expression compared against a threshold. `bound` has
// named constants already substituted so it evaluates from the state
// alone; `display` keeps the symbolic form for rendering.
struct AlgebraicPredicate {
  ExprPtr bound;
  double threshold = 0.0;
  std::string display;
  std::vector<std::pair<std::string, size_t>> var_bindings;  // symbol -> state index
};

using Predicate = std::variant<AxisPredicate, LinearPredicate, PolynomialPredicate,
                               AlgebraicPredicate>;

inline double algebraic_value(const AlgebraicPredicate& p, std::span<const double> state) {
  std::unordered_map<std::string, double> env;
  env.reserve(p.var_bindings.size());
  for (const auto& [name, idx] : p.var_bindings) {
    if (idx >= state.size())
      throw std::invalid_argument("algebraic predicate: state dimension mismatch");
    env.emplace(name, state[idx]);
  }
  return eval(p.bound, env);
}

inline bool evaluate(const Predicate& pred, std::span<const double> state) {
  return std::visit(
      [&](const auto& p) -> bool {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, AxisPredicate>) {
          if (p.feature >= state.size())
            throw std::invalid_argument("axis predicate: feature index out of range");
          return state[p.feature] <= p.threshold;
        } else if constexpr (std::is_same_v<T, LinearPredicate>) {
          if (p.coeffs.size() != state.size())
            throw std::invalid_argument("linear predicate: state dimension mismatch");
          double s = 0.0;
          for (size_t i = 0; i < state.size(); ++i) s += p.coeffs[i] * state[i];
          return s <= p.threshold;
        } else if constexpr (std::is_same_v<T, PolynomialPredicate>) {
          if (p.input_dims != state.size())
            throw std::invalid_argument("polynomial predicate: state dimension mismatch");
          QuadraticMap map = QuadraticMap::for_dims(p.input_dims);
          double s = p.intercept;
          for (size_t d = 0; d < map.output_dims(); ++d)
            s += p.coeffs[d] * map.term(d, state.data());
          return s <= 0.0;
        } else {
          return algebraic_value(p, state) <= p.threshold;
        }
      },
      pred);
}

inline bool evaluate_row(const Predicate& pred, const ControllerDataset& ds, size_t row) {
  if (const auto* axis = std::get_if<AxisPredicate>(&pred)) {
    if (axis->feature >= ds.num_vars())
      throw std::invalid_argument("axis predicate: feature index out of range");
    return ds.columns[axis->feature][row] <= axis->threshold;
  }
  std::vector<double> state = ds.state(row);
  return evaluate(pred, state);
}

// Rows where the predicate holds go left.
inline std::pair<DatasetView, DatasetView> split_view(const DatasetView& view,
                                                      const Predicate& pred) {
  return split_view_by(view, [&](uint32_t r) { return evaluate_row(pred, *view.data, r); });
}

// Candidate thresholds for one variable: midpoints between consecutive
// distinct values seen in the view, so k distinct values yield k-1
// candidates and every candidate actually separates something.
inline std::vector<double> axis_aligned_candidates(const DatasetView& view, size_t feature) {
  if (view.empty()) throw std::invalid_argument("axis_aligned_candidates: empty view");
  if (feature >= view.data->num_vars())
    throw std::invalid_argument("axis_aligned_candidates: feature index out of range");
  std::vector<double> values;
  values.reserve(view.size());
  for (size_t k = 0; k < view.size(); ++k) values.push_back(view.value(k, feature));
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> out;
  out.reserve(values.size() > 0 ? values.size() - 1 : 0);
  for (size_t i = 0; i + 1 < values.size(); ++i) out.push_back((values[i] + values[i + 1]) / 2.0);
  return out;
}

namespace detail {

inline std::string render_linear_terms(std::span<const double> coeffs,
                                       const std::vector<std::string>& names,
                                       bool& any) {
  std::string out;
  for (size_t i = 0; i < coeffs.size(); ++i) {
    double c = coeffs[i];
    if (c == 0.0) continue;
    bool negative = c < 0.0;
    double mag = negative ? -c : c;
    if (!any) {
      if (negative) out += '-';
    } else {
      out += negative ? " - " : " + ";
    }
    if (mag != 1.0) {
      out += format_double(mag);
      out += '*';
    }
    out += names[i];
    any = true;
  }
  return out;
}

}  // namespace detail

// Human-readable form, e.g. "x - 2*y <= 3" or
// "-0.25*v_e^2 + 0.25*v_f^2 - 5*v_e + 3*v_f + d_r + 19.5 <= 0".
// Polynomials list degree-2 terms first (feature-map order: products, then
// squares), then degree-1 terms, then the intercept. Zero coefficients are
// omitted. The output parses back with parse_expr.
inline std::string render(const Predicate& pred, const std::vector<std::string>& names) {
  return std::visit(
      [&](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, AxisPredicate>) {
          return names[p.feature] + " <= " + format_double(p.threshold);
        } else if constexpr (std::is_same_v<T, LinearPredicate>) {
          bool any = false;
          std::string lhs = detail::render_linear_terms(p.coeffs, names, any);
          if (!any) lhs = "0";
          return lhs + " <= " + format_double(p.threshold);
        } else if constexpr (std::is_same_v<T, PolynomialPredicate>) {
          QuadraticMap map = QuadraticMap::for_dims(p.input_dims);
          std::string out;
          bool any = false;
          auto append = [&](double c, const std::string& term) {
            if (c == 0.0) return;
            bool negative = c < 0.0;
            double mag = negative ? -c : c;
            if (!any) {
              if (negative) out += '-';
            } else {
              out += negative ? " - " : " + ";
            }
            if (!term.empty() && mag != 1.0) {
              out += format_double(mag);
              out += '*';
            } else if (term.empty()) {
              out += format_double(mag);
            }
            out += term;
            any = true;
          };
          for (size_t d = 0; d < map.output_dims(); ++d)
            if (map.monomials[d].degree == 2) append(p.coeffs[d], map.monomial_name(d, names));
          for (size_t d = 0; d < map.output_dims(); ++d)
            if (map.monomials[d].degree == 1) append(p.coeffs[d], map.monomial_name(d, names));
          append(p.intercept, "");
          if (!any) out = "0";
          return out + " <= 0";
        } else {
          return p.display + " <= " + format_double(p.threshold);
        }
      },
      pred);
}

// Best midpoint threshold over precomputed per-row values, shared by the
// axis generator and derived-expression scoring. Ties go to the lower
// threshold. Returns nullopt when fewer than two distinct values exist.
struct ThresholdSplit {
  double threshold = 0.0;
  double score = 0.0;
};

inline std::optional<ThresholdSplit> best_threshold_split(std::vector<double> values,
                                                          std::vector<int> labels,
                                                          size_t num_labels,
                                                          ImpurityKind kind) {
  if (values.size() != labels.size())
    throw std::invalid_argument("best_threshold_split: size mismatch");
  const size_t n = values.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });

  std::vector<size_t> total(num_labels, 0);
  for (int l : labels) ++total[static_cast<size_t>(l)];
  std::vector<size_t> left(num_labels, 0);
  std::vector<size_t> right = total;

  std::optional<ThresholdSplit> best;
  size_t i = 0;
  while (i < n) {
    // Move one run of equal values to the left side.
    double v = values[order[i]];
    while (i < n && values[order[i]] == v) {
      size_t lab = static_cast<size_t>(labels[order[i]]);
      ++left[lab];
      --right[lab];
      ++i;
    }
    if (i == n) break;
    double threshold = (v + values[order[i]]) / 2.0;
    double score = split_score(kind, left, right);
    if (!best || score < best->score) best = ThresholdSplit{threshold, score};
  }
  return best;
}

}  // namespace polydt
