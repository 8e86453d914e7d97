#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "polydt/util.hpp"

namespace polydt {

// Explicit degree-2 feature map over M state variables:
//   all v_i, then all products v_i*v_j with i < j, then all squares v_i^2,
// giving M + M(M+1)/2 output dimensions. The order is part of the file
// formats, so it never changes.
struct QuadraticMap {
  struct Monomial {
    size_t i = 0;
    size_t j = 0;  // == i for linear and square terms
    int degree = 1;
  };

  size_t input_dims = 0;
  std::vector<Monomial> monomials;

  static QuadraticMap for_dims(size_t m) {
    if (m == 0) throw std::invalid_argument("QuadraticMap: zero input dimensions");
    QuadraticMap map;
    map.input_dims = m;
    map.monomials.reserve(m + m * (m + 1) / 2);
    for (size_t i = 0; i < m; ++i) map.monomials.push_back({i, i, 1});
    for (size_t i = 0; i < m; ++i)
      for (size_t j = i + 1; j < m; ++j) map.monomials.push_back({i, j, 2});
    for (size_t i = 0; i < m; ++i) map.monomials.push_back({i, i, 2});
    return map;
  }

  size_t output_dims() const { return monomials.size(); }

  double term(size_t d, const double* state) const {
    const Monomial& mo = monomials[d];
    return mo.degree == 1 ? state[mo.i] : state[mo.i] * state[mo.j];
  }

  void apply(const double* state, double* out) const {
    for (size_t d = 0; d < monomials.size(); ++d) out[d] = term(d, state);
  }

  std::vector<double> apply(std::span<const double> state) const {
    if (state.size() != input_dims)
      throw std::invalid_argument("QuadraticMap::apply: dimension mismatch");
    std::vector<double> out(output_dims());
    apply(state.data(), out.data());
    return out;
  }

  Matrix apply_rows(const Matrix& states) const {
    if (states.cols != input_dims)
      throw std::invalid_argument("QuadraticMap::apply_rows: dimension mismatch");
    Matrix out(states.rows, output_dims());
    for (size_t i = 0; i < states.rows; ++i) apply(states.row(i), out.row(i));
    return out;
  }

  std::string monomial_name(size_t d, const std::vector<std::string>& names) const {
    const Monomial& mo = monomials[d];
    if (mo.degree == 1) return names[mo.i];
    if (mo.i == mo.j) return names[mo.i] + "^2";
    return names[mo.i] + "*" + names[mo.j];
  }
};

// Separating hyperplane; a sample x is on the positive side when
// w.x - b > 0 and exactly on the boundary when w.x - b = 0.
struct Hyperplane {
  std::vector<double> weights;
  double bias = 0.0;

  double decision(const double* x) const {
    double s = -bias;
    for (size_t d = 0; d < weights.size(); ++d) s += weights[d] * x[d];
    return s;
  }

  double decision(std::span<const double> x) const {
    if (x.size() != weights.size())
      throw std::invalid_argument("Hyperplane::decision: dimension mismatch");
    return decision(x.data());
  }

  // Boundary samples count as the positive side, matching the convention
  // that predicates route equality to the true branch.
  bool positive_side(const double* x) const { return decision(x) >= 0.0; }
};

// Per-column z-score parameters fitted on training data. Population
// variance (divide by N); constant columns keep sigma = 1 so transforms
// stay defined.
struct Standardizer {
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<bool> constant;

  size_t dims() const { return means.size(); }
};

inline Standardizer fit_standardizer(const Matrix& features) {
  if (features.rows == 0) throw std::invalid_argument("fit_standardizer: no rows");
  Standardizer st;
  st.means.assign(features.cols, 0.0);
  st.stds.assign(features.cols, 0.0);
  st.constant.assign(features.cols, false);
  for (size_t i = 0; i < features.rows; ++i) {
    const double* row = features.row(i);
    for (size_t d = 0; d < features.cols; ++d) st.means[d] += row[d];
  }
  for (size_t d = 0; d < features.cols; ++d) st.means[d] /= static_cast<double>(features.rows);
  for (size_t i = 0; i < features.rows; ++i) {
    const double* row = features.row(i);
    for (size_t d = 0; d < features.cols; ++d) {
      double diff = row[d] - st.means[d];
      st.stds[d] += diff * diff;
    }
  }
  for (size_t d = 0; d < features.cols; ++d) {
    st.stds[d] = std::sqrt(st.stds[d] / static_cast<double>(features.rows));
    if (st.stds[d] == 0.0) {
      st.stds[d] = 1.0;
      st.constant[d] = true;
    }
  }
  return st;
}

inline Matrix standardize(const Matrix& features, const Standardizer& st) {
  if (features.cols != st.dims())
    throw std::invalid_argument("standardize: dimension mismatch");
  Matrix out = features;
  for (size_t i = 0; i < out.rows; ++i) {
    double* row = out.row(i);
    for (size_t d = 0; d < out.cols; ++d) row[d] = (row[d] - st.means[d]) / st.stds[d];
  }
  return out;
}

// Maps a hyperplane fitted on z-scored features back to raw feature space:
//   w.z - b  with  z_d = (x_d - mu_d) / sigma_d
// equals  w'.x - b'  for  w'_d = w_d / sigma_d  and
// b' = b + sum_d w_d mu_d / sigma_d, so every sample keeps its exact
// decision value and therefore its side.
inline Hyperplane destandardize_hyperplane(const Hyperplane& h, const Standardizer& st) {
  if (h.weights.size() != st.dims())
    throw std::invalid_argument("destandardize_hyperplane: dimension mismatch");
  Hyperplane out;
  out.weights.resize(h.weights.size());
  double shift = 0.0;
  for (size_t d = 0; d < h.weights.size(); ++d) {
    out.weights[d] = h.weights[d] / st.stds[d];
    shift += h.weights[d] * st.means[d] / st.stds[d];
  }
  out.bias = h.bias + shift;
  return out;
}

}  // namespace polydt
