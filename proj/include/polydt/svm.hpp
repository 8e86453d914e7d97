#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "polydt/dataset.hpp"
#include "polydt/featuremap.hpp"
#include "polydt/predicate.hpp"
#include "polydt/prettify.hpp"

namespace polydt {

struct SvmConfig {
  double cost = 1.0;        // per-sample upper bound is cost * sample weight
  double tolerance = 1e-4;  // max dual optimality violation per epoch
  int max_epochs = 1000;
  // A raw-space coefficient above this magnitude triggers the unit-vector
  // control samples and a retrain.
  double control_sample_trigger = 1e7;
  double control_sample_weight = 1e-3;
};

struct TrainResult {
  Hyperplane plane;  // same feature space as the training matrix
  double accuracy = 0.0;
  bool converged = false;
  int epochs = 0;
};

// L1-loss dual coordinate descent for a linear SVM. The bias is learned as
// an appended always-1 feature, regularized like any other weight. Samples
// are visited in index order every epoch with no shuffling, so training is
// deterministic. Stops once the largest projected-gradient violation in an
// epoch falls below the tolerance.
inline TrainResult train_linear_svm(const Matrix& features, const std::vector<int>& labels,
                                    const std::vector<double>& sample_weights,
                                    const SvmConfig& cfg) {
  const size_t n = features.rows;
  const size_t d = features.cols;
  if (n == 0) throw std::invalid_argument("train_linear_svm: no samples");
  if (labels.size() != n) throw std::invalid_argument("train_linear_svm: label count mismatch");
  if (!sample_weights.empty() && sample_weights.size() != n)
    throw std::invalid_argument("train_linear_svm: weight count mismatch");

  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == 1)
      has_pos = true;
    else if (y == -1)
      has_neg = true;
    else
      throw std::invalid_argument("train_linear_svm: labels must be +1 or -1");
  }
  if (!has_pos || !has_neg)
    throw std::invalid_argument("train_linear_svm: both classes must be present");
  for (double v : features.data)
    if (!std::isfinite(v)) throw std::invalid_argument("train_linear_svm: non-finite feature");

  std::vector<double> upper(n);
  for (size_t i = 0; i < n; ++i)
    upper[i] = cfg.cost * (sample_weights.empty() ? 1.0 : sample_weights[i]);

  std::vector<double> qii(n);
  for (size_t i = 0; i < n; ++i) {
    const double* x = features.row(i);
    double q = 1.0;  // bias feature
    for (size_t k = 0; k < d; ++k) q += x[k] * x[k];
    qii[i] = q;
  }

  std::vector<double> w(d + 1, 0.0);  // w[d] is the bias feature weight
  std::vector<double> alpha(n, 0.0);

  TrainResult result;
  int epoch = 0;
  for (; epoch < cfg.max_epochs; ++epoch) {
    double max_violation = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double* x = features.row(i);
      const double yi = static_cast<double>(labels[i]);
      double decision = w[d];
      for (size_t k = 0; k < d; ++k) decision += w[k] * x[k];
      double g = yi * decision - 1.0;

      double pg;
      if (alpha[i] <= 0.0)
        pg = std::min(g, 0.0);
      else if (alpha[i] >= upper[i])
        pg = std::max(g, 0.0);
      else
        pg = g;

      if (pg != 0.0) {
        max_violation = std::max(max_violation, std::fabs(pg));
        double next = std::min(std::max(alpha[i] - g / qii[i], 0.0), upper[i]);
        double delta = next - alpha[i];
        if (delta != 0.0) {
          alpha[i] = next;
          for (size_t k = 0; k < d; ++k) w[k] += delta * yi * x[k];
          w[d] += delta * yi;
        }
      }
    }
    if (max_violation < cfg.tolerance) {
      result.converged = true;
      ++epoch;
      break;
    }
  }
  result.epochs = epoch;

  result.plane.weights.assign(w.begin(), w.begin() + static_cast<long>(d));
  result.plane.bias = -w[d];

  size_t correct = 0;
  for (size_t i = 0; i < n; ++i)
    if (result.plane.positive_side(features.row(i)) == (labels[i] > 0)) ++correct;
  result.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return result;
}

// One-vs-rest encoding: +1 for the target label, -1 for everything else.
inline std::vector<int> one_vs_rest_encode(const DatasetView& view, int target_label) {
  std::vector<int> y(view.size());
  for (size_t k = 0; k < view.size(); ++k)
    y[k] = view.label_of(k) == target_label ? 1 : -1;
  return y;
}

// Appends one positive and one negative unit-vector sample per feature
// dimension, each with a small weight. They anchor the objective so no
// single coefficient can grow without bound when a direction is otherwise
// unconstrained by the data.
inline void augment_control_samples(Matrix& features, std::vector<int>& labels,
                                    std::vector<double>& weights, double control_weight) {
  const size_t d = features.cols;
  if (weights.empty()) weights.assign(features.rows, 1.0);
  for (size_t dim = 0; dim < d; ++dim) {
    for (int y : {1, -1}) {
      features.data.insert(features.data.end(), d, 0.0);
      features.data[features.rows * d + dim] = 1.0;
      ++features.rows;
      labels.push_back(y);
      weights.push_back(control_weight);
    }
  }
}

// ---- one-vs-rest split candidates -------------------------------------------

enum class SplitGenerator {
  axis,
  svm_linear,
  svm_poly,
  domain_kb,
};

struct SplitCandidate {
  Predicate pred;
  double impurity = 0.0;
  double priority = 1.0;
  SplitGenerator generator = SplitGenerator::axis;
  int target_label = -1;  // svm generators: which label sits on the true side
  PrettifyStats prettify_stats;
};

struct SvmCandidateConfig {
  SvmConfig svm;
  ImpurityKind impurity = ImpurityKind::entropy;
  bool prettify = true;
};

namespace detail {

inline Matrix view_states(const DatasetView& view) {
  Matrix out(view.size(), view.data->num_vars());
  for (size_t k = 0; k < view.size(); ++k)
    for (size_t j = 0; j < out.cols; ++j) out.at(k, j) = view.value(k, j);
  return out;
}

inline Matrix masked_columns(const Matrix& m, const std::vector<bool>& excluded) {
  Matrix out = m;
  for (size_t d = 0; d < m.cols; ++d) {
    if (!excluded[d]) continue;
    for (size_t i = 0; i < m.rows; ++i) out.at(i, d) = 0.0;
  }
  return out;
}

}  // namespace detail

// Trains one separating hyperplane per label (one-vs-rest) over either the
// raw state variables or their quadratic feature map, prettifies each, and
// returns the best-scoring induced split. The true branch is the target
// label's side. Labels are tried in label-table order and ties keep the
// earlier label. Returns nullopt when the view is pure or no hyperplane
// separates anything (one side empty).
inline std::optional<SplitCandidate> svm_split_candidate(const DatasetView& view, bool quadratic,
                                                         const SvmCandidateConfig& cfg) {
  if (view.empty()) return std::nullopt;
  auto stats = label_statistics(view);
  if (stats.distinct < 2) return std::nullopt;

  const Matrix states = detail::view_states(view);
  const QuadraticMap map = QuadraticMap::for_dims(view.data->num_vars());
  const Matrix raw_features = quadratic ? map.apply_rows(states) : states;
  const Standardizer st = fit_standardizer(raw_features);
  const Matrix std_features = standardize(raw_features, st);

  std::optional<SplitCandidate> best;
  for (size_t lid = 0; lid < stats.counts.size(); ++lid) {
    if (stats.counts[lid] == 0) continue;
    std::vector<int> y = one_vs_rest_encode(view, static_cast<int>(lid));

    Matrix train_x = std_features;
    std::vector<int> train_y = y;
    std::vector<double> train_w;
    PrettifyStats pstats;

    TrainResult trained = train_linear_svm(train_x, train_y, train_w, cfg.svm);
    Hyperplane raw_plane = destandardize_hyperplane(trained.plane, st);

    double max_coef = 0.0;
    for (double wv : raw_plane.weights) max_coef = std::max(max_coef, std::fabs(wv));
    if (max_coef > cfg.svm.control_sample_trigger) {
      augment_control_samples(train_x, train_y, train_w, cfg.svm.control_sample_weight);
      pstats.control_samples_used = true;
      trained = train_linear_svm(train_x, train_y, train_w, cfg.svm);
      raw_plane = destandardize_hyperplane(trained.plane, st);
    }

    if (cfg.prettify) {
      RetrainFn retrain = [&](const std::vector<bool>& excluded) -> std::optional<Hyperplane> {
        try {
          Matrix masked = detail::masked_columns(train_x, excluded);
          TrainResult r = train_linear_svm(masked, train_y, train_w, cfg.svm);
          return destandardize_hyperplane(r.plane, st);
        } catch (const std::exception&) {
          return std::nullopt;
        }
      };
      raw_plane = zero_coefficients(raw_features, y, std::move(raw_plane), retrain, &pstats);
      raw_plane = scale_hyperplane(std::move(raw_plane), &pstats);
      raw_plane = round_coefficients(std::move(raw_plane), raw_features, &pstats);
      Hyperplane clamped = clamp_coefficients(raw_plane, &pstats);
      if (pstats.clamped_terms > 0)
        pstats.clamp_changed_rows = count_side_changes(raw_plane, clamped, raw_features);
      raw_plane = std::move(clamped);
    }

    // Positive side (w.x - b >= 0) becomes the true branch: negate into
    // the stored "<= 0" / "<= c" forms.
    Predicate pred;
    if (quadratic) {
      PolynomialPredicate poly;
      poly.input_dims = view.data->num_vars();
      poly.coeffs.resize(raw_plane.weights.size());
      for (size_t d = 0; d < raw_plane.weights.size(); ++d) poly.coeffs[d] = -raw_plane.weights[d];
      poly.intercept = raw_plane.bias;
      pred = std::move(poly);
    } else {
      LinearPredicate lin;
      lin.coeffs.resize(raw_plane.weights.size());
      for (size_t d = 0; d < raw_plane.weights.size(); ++d) lin.coeffs[d] = -raw_plane.weights[d];
      lin.threshold = -raw_plane.bias;
      pred = std::move(lin);
    }

    auto [left, right] = split_view(view, pred);
    if (left.empty() || right.empty()) continue;
    double score = split_score(cfg.impurity, label_counts(left), label_counts(right));

    if (!best || score < best->impurity) {
      SplitCandidate cand;
      cand.pred = std::move(pred);
      cand.impurity = score;
      cand.generator = quadratic ? SplitGenerator::svm_poly : SplitGenerator::svm_linear;
      cand.target_label = static_cast<int>(lid);
      cand.prettify_stats = std::move(pstats);
      best = std::move(cand);
    }
  }
  return best;
}

}  // namespace polydt
