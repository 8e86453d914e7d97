#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "polydt/dataset.hpp"
#include "polydt/featuremap.hpp"

namespace polydt {

// ---- global variable screen ------------------------------------------------

struct RelevanceReport {
  // Collision ratio observed when each variable was tested (fraction of
  // rows that would share all remaining coordinates with a row of a
  // different label if the variable were dropped). Indexed by original
  // variable position.
  std::vector<double> collision_ratio;
  // Variables removed, in removal order.
  std::vector<size_t> removed;
};

// Tests variables in declaration order and permanently drops each one whose
// removal causes no label collisions among the rows, i.e. the remaining
// variables still determine the label. Removals are incremental: later
// tests group by the currently kept variables only.
inline RelevanceReport feature_relevance(const ControllerDataset& ds) {
  const size_t m = ds.num_vars();
  RelevanceReport report;
  report.collision_ratio.assign(m, 0.0);
  std::vector<bool> kept(m, true);

  struct Group {
    int first_label;
    size_t rows;
    bool collided;
  };

  for (size_t j = 0; j < m; ++j) {
    std::unordered_map<std::vector<double>, Group, detail::StateKeyHash, detail::StateKeyEq>
        groups;
    std::vector<double> key;
    for (size_t i = 0; i < ds.num_rows(); ++i) {
      key.clear();
      for (size_t v = 0; v < m; ++v) {
        if (v == j || !kept[v]) continue;
        key.push_back(ds.columns[v][i]);
      }
      auto [it, inserted] = groups.try_emplace(key, Group{ds.row_labels[i], 1, false});
      if (!inserted) {
        ++it->second.rows;
        if (it->second.first_label != ds.row_labels[i]) it->second.collided = true;
      }
    }
    size_t colliding_rows = 0;
    for (const auto& [k, g] : groups)
      if (g.collided) colliding_rows += g.rows;
    double ratio = static_cast<double>(colliding_rows) / static_cast<double>(ds.num_rows());
    report.collision_ratio[j] = ratio;
    if (ratio == 0.0) {
      kept[j] = false;
      report.removed.push_back(j);
    }
  }
  return report;
}

// ---- per-node hyperplane cosmetics ------------------------------------------

struct PrettifyStats {
  bool control_samples_used = false;
  std::vector<size_t> zeroed_dims;
  double scale_factor = 1.0;
  size_t rounded_terms = 0;        // terms whose stored value changed
  size_t clamped_terms = 0;
  size_t clamp_changed_rows = 0;   // rows whose side changed due to clamping
};

namespace detail {

inline bool plane_side(const Hyperplane& h, const double* x) { return h.decision(x) >= 0.0; }

inline std::vector<bool> plane_sides(const Hyperplane& h, const Matrix& rows) {
  std::vector<bool> out(rows.rows);
  for (size_t i = 0; i < rows.rows; ++i) out[i] = plane_side(h, rows.row(i));
  return out;
}

inline double plane_accuracy(const Hyperplane& h, const Matrix& rows, const std::vector<int>& y) {
  size_t correct = 0;
  for (size_t i = 0; i < rows.rows; ++i)
    if (plane_side(h, rows.row(i)) == (y[i] > 0)) ++correct;
  return rows.rows == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(rows.rows);
}

}  // namespace detail

// Retrains with the flagged feature dimensions excluded, returning the new
// hyperplane in the same (raw) space, or nullopt if training failed.
using RetrainFn = std::function<std::optional<Hyperplane>(const std::vector<bool>& excluded)>;

// Tries to zero coefficients one at a time, smallest magnitude first, each
// time retraining with that dimension excluded. A removal sticks only if
// the retrained plane is no less accurate than the input plane and assigns
// every row its original side; otherwise the coefficient is restored and
// the next candidate is tried. Each dimension is attempted once.
inline Hyperplane zero_coefficients(const Matrix& rows, const std::vector<int>& y,
                                    Hyperplane plane, const RetrainFn& retrain,
                                    PrettifyStats* stats = nullptr) {
  const size_t dims = plane.weights.size();
  const double a0 = detail::plane_accuracy(plane, rows, y);
  const std::vector<bool> sides0 = detail::plane_sides(plane, rows);
  std::vector<bool> excluded(dims, false);
  std::vector<bool> tried(dims, false);

  while (true) {
    size_t pick = dims;
    double best = 0.0;
    for (size_t d = 0; d < dims; ++d) {
      if (tried[d] || plane.weights[d] == 0.0) continue;
      double mag = std::fabs(plane.weights[d]);
      if (pick == dims || mag < best) {
        pick = d;
        best = mag;
      }
    }
    if (pick == dims) break;
    tried[pick] = true;
    excluded[pick] = true;
    std::optional<Hyperplane> cand = retrain(excluded);
    bool keep = false;
    if (cand && cand->weights.size() == dims) {
      cand->weights[pick] = 0.0;
      if (detail::plane_accuracy(*cand, rows, y) >= a0 &&
          detail::plane_sides(*cand, rows) == sides0) {
        keep = true;
      }
    }
    if (keep) {
      plane = std::move(*cand);
      if (stats) stats->zeroed_dims.push_back(pick);
    } else {
      excluded[pick] = false;
    }
  }
  return plane;
}

// Rescales so the nonzero coefficient already closest to magnitude 1
// becomes exactly +/-1. Positive scaling preserves every decision value's
// sign, hence the partition.
inline Hyperplane scale_hyperplane(Hyperplane plane, PrettifyStats* stats = nullptr) {
  size_t pick = plane.weights.size();
  double best = 0.0;
  for (size_t d = 0; d < plane.weights.size(); ++d) {
    if (plane.weights[d] == 0.0) continue;
    double dist = std::fabs(std::fabs(plane.weights[d]) - 1.0);
    if (pick == plane.weights.size() || dist < best) {
      pick = d;
      best = dist;
    }
  }
  if (pick == plane.weights.size()) return plane;  // no nonzero coefficients
  // divide instead of multiplying by the reciprocal: x/x is exactly 1, so
  // the picked coefficient lands on +/-1 with no rounding residue
  double mag = std::fabs(plane.weights[pick]);
  for (double& w : plane.weights) w /= mag;
  plane.bias /= mag;
  if (stats) stats->scale_factor = 1.0 / mag;
  return plane;
}

namespace detail {

// Candidate tested in over-approximated form: nudged away from the value
// it would replace by 1e-5 relative to its own magnitude, so a row that
// sits too close to the new boundary rejects the rounding instead of
// silently ending up on the wrong side later.
inline double overapprox_candidate(double original, double candidate) {
  if (candidate == original) return candidate;
  double dir = candidate > original ? 1.0 : -1.0;
  double scale = std::pow(10.0, std::floor(std::log10(std::fabs(candidate))));
  return candidate + dir * 1e-5 * scale;
}

// Rounds v to `digits` significant digits, ties away from zero.
inline double round_significant(double v, int digits) {
  if (v == 0.0) return 0.0;
  double mag = std::floor(std::log10(std::fabs(v)));
  double scale = std::pow(10.0, mag - digits + 1);
  return std::round(v / scale) * scale;
}

// Nearest power of ten with v's sign; linear distance, ties to the smaller.
inline double nearest_power_of_ten(double v) {
  double sign = v < 0.0 ? -1.0 : 1.0;
  double mag = std::fabs(v);
  double lo = std::pow(10.0, std::floor(std::log10(mag)));
  double hi = lo * 10.0;
  double pick = (mag - lo) <= (hi - mag) ? lo : hi;
  return sign * pick;
}

}  // namespace detail

// Rounds each term to the coarsest form the data tolerates: nearest power
// of ten, then 1, 2, ... significant digits, stopping at the first
// candidate that keeps every row on its current side. Candidates are
// tested in over-approximated form (see overapprox_candidate); no
// retraining happens. Weights are visited smallest magnitude first, the
// intercept last.
inline Hyperplane round_coefficients(Hyperplane plane, const Matrix& rows,
                                     PrettifyStats* stats = nullptr) {
  const std::vector<bool> sides0 = detail::plane_sides(plane, rows);
  const size_t dims = plane.weights.size();

  std::vector<size_t> order;
  for (size_t d = 0; d < dims; ++d)
    if (plane.weights[d] != 0.0) order.push_back(d);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    double ma = std::fabs(plane.weights[a]);
    double mb = std::fabs(plane.weights[b]);
    return ma != mb ? ma < mb : a < b;
  });
  order.push_back(dims);  // sentinel for the intercept

  for (size_t d : order) {
    double original = d == dims ? plane.bias : plane.weights[d];
    if (d == dims && original == 0.0) continue;

    std::vector<double> candidates;
    candidates.push_back(detail::nearest_power_of_ten(original));
    for (int digits = 1; digits <= 17; ++digits) {
      double c = detail::round_significant(original, digits);
      if (candidates.empty() || candidates.back() != c) candidates.push_back(c);
      if (c == original) break;
    }
    if (candidates.back() != original) candidates.push_back(original);

    for (double cand : candidates) {
      double tested = detail::overapprox_candidate(original, cand);
      Hyperplane trial = plane;
      (d == dims ? trial.bias : trial.weights[d]) = tested;
      if (detail::plane_sides(trial, rows) != sides0) continue;
      if (cand != original) {
        (d == dims ? plane.bias : plane.weights[d]) = cand;
        if (detail::plane_sides(plane, rows) != sides0) {
          // The adopted value itself must also preserve sides; back out if
          // the nudge passed but the exact value does not.
          (d == dims ? plane.bias : plane.weights[d]) = original;
          continue;
        }
        if (stats) ++stats->rounded_terms;
      }
      break;
    }
  }
  return plane;
}

// Hard numeric guards for export: magnitudes above 1e7 are pulled down to
// 1e7 and nonzero magnitudes below 1e-7 pushed up to 1e-7, keeping signs.
// Exact zeros stay. This is the one step that may move rows across the
// boundary; callers measure and report that.
inline Hyperplane clamp_coefficients(Hyperplane plane, PrettifyStats* stats = nullptr) {
  auto clamp_one = [&](double v) {
    if (v == 0.0) return v;
    double mag = std::fabs(v);
    double sign = v < 0.0 ? -1.0 : 1.0;
    if (mag > 1e7) {
      if (stats) ++stats->clamped_terms;
      return sign * 1e7;
    }
    if (mag < 1e-7) {
      if (stats) ++stats->clamped_terms;
      return sign * 1e-7;
    }
    return v;
  };
  for (double& w : plane.weights) w = clamp_one(w);
  plane.bias = clamp_one(plane.bias);
  return plane;
}

inline size_t count_side_changes(const Hyperplane& before, const Hyperplane& after,
                                 const Matrix& rows) {
  size_t changed = 0;
  for (size_t i = 0; i < rows.rows; ++i)
    if (detail::plane_side(before, rows.row(i)) != detail::plane_side(after, rows.row(i)))
      ++changed;
  return changed;
}

}  // namespace polydt
