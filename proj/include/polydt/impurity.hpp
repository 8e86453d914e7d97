#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace polydt {

enum class ImpurityKind {
  entropy,
  min_label_entropy,
};

namespace detail {

inline size_t count_sum(std::span<const size_t> counts) {
  size_t n = 0;
  for (size_t c : counts) n += c;
  return n;
}

// Single-probability entropy contribution K(p) = -p log2 p, with K(0) = 0.
inline double entropy_term(double p) {
  if (p <= 0.0) return 0.0;
  return -p * std::log2(p);
}

}  // namespace detail

// Shannon entropy of a label distribution given per-label counts.
inline double entropy(std::span<const size_t> counts) {
  size_t n = detail::count_sum(counts);
  if (n == 0) throw std::invalid_argument("entropy: empty distribution");
  double h = 0.0;
  for (size_t c : counts) {
    if (c == 0) continue;
    h += detail::entropy_term(static_cast<double>(c) / static_cast<double>(n));
  }
  return h;
}

inline double entropy(const std::vector<size_t>& counts) {
  return entropy(std::span<const size_t>(counts.data(), counts.size()));
}

// Size-weighted entropy of a binary split.
inline double split_entropy(std::span<const size_t> left, std::span<const size_t> right) {
  size_t nl = detail::count_sum(left);
  size_t nr = detail::count_sum(right);
  if (nl + nr == 0) throw std::invalid_argument("split_entropy: both sides empty");
  double n = static_cast<double>(nl + nr);
  double h = 0.0;
  if (nl > 0) h += (nl / n) * entropy(left);
  if (nr > 0) h += (nr / n) * entropy(right);
  return h;
}

inline double split_entropy(const std::vector<size_t>& l, const std::vector<size_t>& r) {
  return split_entropy(std::span<const size_t>(l.data(), l.size()),
                       std::span<const size_t>(r.data(), r.size()));
}

// Cheapest-label split impurity: for each label y present in the parent,
// weigh only y's own entropy contribution on each side, then take the
// minimum over y. Exactly 0 when some label lands fully on one side with
// nothing else, which is what makes it favor carving off one action set
// per split. Lower-bounded by 0 and never above split_entropy.
inline double min_label_entropy(std::span<const size_t> left, std::span<const size_t> right) {
  if (left.size() != right.size())
    throw std::invalid_argument("min_label_entropy: mismatched label dimensions");
  size_t nl = detail::count_sum(left);
  size_t nr = detail::count_sum(right);
  if (nl + nr == 0) throw std::invalid_argument("min_label_entropy: both sides empty");
  double n = static_cast<double>(nl + nr);
  double best = -1.0;
  for (size_t y = 0; y < left.size(); ++y) {
    if (left[y] + right[y] == 0) continue;  // label absent from the parent
    double h = 0.0;
    if (nl > 0)
      h += (nl / n) * detail::entropy_term(static_cast<double>(left[y]) / static_cast<double>(nl));
    if (nr > 0)
      h += (nr / n) * detail::entropy_term(static_cast<double>(right[y]) / static_cast<double>(nr));
    if (best < 0.0 || h < best) best = h;
  }
  if (best < 0.0) throw std::invalid_argument("min_label_entropy: no labels present");
  return best;
}

inline double min_label_entropy(const std::vector<size_t>& l, const std::vector<size_t>& r) {
  return min_label_entropy(std::span<const size_t>(l.data(), l.size()),
                           std::span<const size_t>(r.data(), r.size()));
}

// Split impurity under the configured measure.
inline double split_score(ImpurityKind kind, std::span<const size_t> left,
                          std::span<const size_t> right) {
  switch (kind) {
    case ImpurityKind::entropy:
      return split_entropy(left, right);
    case ImpurityKind::min_label_entropy:
      return min_label_entropy(left, right);
  }
  throw std::logic_error("split_score: unknown impurity kind");
}

inline double split_score(ImpurityKind kind, const std::vector<size_t>& l,
                          const std::vector<size_t>& r) {
  return split_score(kind, std::span<const size_t>(l.data(), l.size()),
                     std::span<const size_t>(r.data(), r.size()));
}

}  // namespace polydt
