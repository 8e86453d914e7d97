#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "polydt/dataset.hpp"
#include "polydt/util.hpp"

namespace polydt {

// Two-car distance keeping on a discrete grid: the ego car picks its
// acceleration first, then the car in front picks adversarially, both from
// {-2, 0, 2} m/s^2 applied for one decision period. Velocities live on an
// even grid in [v_min, v_max]; the sensed distance d_r is an integer in
// [0, d_max], saturating at d_max. Safe means d_r >= d_safe forever.
struct CruiseParams {
  int v_min = -6;
  int v_max = 20;
  int d_max = 250;
  int d_safe = 5;
  int t1 = 1;  // decision period

  static constexpr std::array<int, 3> accelerations{-2, 0, 2};

  int velocity_count() const { return (v_max - v_min) / 2 + 1; }
  int distance_count() const { return d_max + 1; }
};

inline void validate(const CruiseParams& p) {
  if (p.v_min > p.v_max) throw std::invalid_argument("cruise: v_min exceeds v_max");
  if ((p.v_max - p.v_min) % 2 != 0)
    throw std::invalid_argument("cruise: velocity range must be a multiple of 2");
  if (p.d_max < 0) throw std::invalid_argument("cruise: d_max must be non-negative");
  if (p.d_safe < 0 || p.d_safe > p.d_max)
    throw std::invalid_argument("cruise: d_safe must lie within [0, d_max]");
  if (p.t1 <= 0) throw std::invalid_argument("cruise: t1 must be positive");
}

struct CruiseState {
  int v_e = 0;
  int v_f = 0;
  int d_r = 0;
};

// An acceleration can be chosen only if it keeps the velocity inside
// [v_min, v_max]; holding speed is always allowed. Nothing saturates:
// at v_max the ego simply cannot pick +2.
inline bool action_available(int v, int a, const CruiseParams& p) {
  if (a == 0) return true;
  int next = v + a * p.t1;
  return next >= p.v_min && next <= p.v_max;
}

// One decision period of constant accelerations. The distance follows the
// relative kinematics and saturates at the sensor range d_max; it may come
// out negative, which simply means the run is already lost. Both actions
// must be available in the given state.
inline CruiseState step_dynamics(const CruiseState& s, int a_e, int a_f,
                                 const CruiseParams& p) {
  if (!action_available(s.v_e, a_e, p))
    throw std::invalid_argument("step_dynamics: ego action unavailable");
  if (!action_available(s.v_f, a_f, p))
    throw std::invalid_argument("step_dynamics: front action unavailable");
  CruiseState next;
  next.v_e = s.v_e + a_e * p.t1;
  next.v_f = s.v_f + a_f * p.t1;
  // (a_f - a_e) is even, so the halved term stays integral.
  next.d_r = s.d_r + (s.v_f - s.v_e) * p.t1 + (a_f - a_e) * p.t1 * p.t1 / 2;
  if (next.d_r > p.d_max) next.d_r = p.d_max;
  return next;
}

namespace detail {

struct CruiseIndex {
  const CruiseParams* p;
  int nv;
  int nd;

  explicit CruiseIndex(const CruiseParams& params)
      : p(&params), nv(params.velocity_count()), nd(params.distance_count()) {}

  size_t size() const { return static_cast<size_t>(nv) * nv * nd; }

  size_t of(int v_e, int v_f, int d_r) const {
    size_t ie = static_cast<size_t>((v_e - p->v_min) / 2);
    size_t id = static_cast<size_t>((v_f - p->v_min) / 2);
    return (ie * static_cast<size_t>(nv) + id) * static_cast<size_t>(nd) +
           static_cast<size_t>(d_r);
  }

  CruiseState state(size_t idx) const {
    CruiseState s;
    s.d_r = static_cast<int>(idx % static_cast<size_t>(nd));
    idx /= static_cast<size_t>(nd);
    s.v_f = p->v_min + 2 * static_cast<int>(idx % static_cast<size_t>(nv));
    idx /= static_cast<size_t>(nv);
    s.v_e = p->v_min + 2 * static_cast<int>(idx);
    return s;
  }
};

}  // namespace detail

// Maximal safety fixpoint: start from all states with d_r >= d_safe and
// repeatedly remove states where no available ego action keeps every
// available front response inside the set. The surviving region W is the
// largest set the ego can stay in forever; the emitted controller allows,
// per state in W, exactly the actions all of whose successors stay in W.
// States are emitted in ascending (v_e, v_f, d_r) order with actions
// named "-2", "0", "2".
inline ControllerDataset synthesize_controller(const CruiseParams& p, int threads = 1) {
  validate(p);
  detail::CruiseIndex index(p);
  std::vector<char> winning(index.size(), 0);
  for (size_t i = 0; i < index.size(); ++i)
    winning[i] = index.state(i).d_r >= p.d_safe ? 1 : 0;

  auto successor_safe = [&](const CruiseState& s, int a_e, const std::vector<char>& w) {
    for (int a_f : CruiseParams::accelerations) {
      if (!action_available(s.v_f, a_f, p)) continue;
      CruiseState next = step_dynamics(s, a_e, a_f, p);
      if (next.d_r < 0 || !w[index.of(next.v_e, next.v_f, next.d_r)]) return false;
    }
    return true;
  };

  bool changed = true;
  std::vector<char> next(index.size(), 0);
  while (changed) {
    changed = false;
    parallel_for(index.size(), threads, [&](size_t i) {
      if (!winning[i]) {
        next[i] = 0;
        return;
      }
      CruiseState s = index.state(i);
      bool keep = false;
      for (int a_e : CruiseParams::accelerations) {
        if (!action_available(s.v_e, a_e, p)) continue;
        if (successor_safe(s, a_e, winning)) {
          keep = true;
          break;
        }
      }
      next[i] = keep ? 1 : 0;
    });
    for (size_t i = 0; i < index.size(); ++i) {
      if (winning[i] != next[i]) {
        changed = true;
        break;
      }
    }
    std::swap(winning, next);
  }

  ControllerDataset ds;
  ds.variable_names = {"v_e", "v_f", "d_r"};
  ds.action_names = {"-2", "0", "2"};
  ds.columns.resize(3);
  std::map<std::vector<int>, int> label_index;

  for (int v_e = p.v_min; v_e <= p.v_max; v_e += 2) {
    for (int v_f = p.v_min; v_f <= p.v_max; v_f += 2) {
      for (int d_r = 0; d_r <= p.d_max; ++d_r) {
        if (!winning[index.of(v_e, v_f, d_r)]) continue;
        CruiseState s{v_e, v_f, d_r};
        std::vector<int> allowed;
        for (size_t ai = 0; ai < CruiseParams::accelerations.size(); ++ai) {
          int a_e = CruiseParams::accelerations[ai];
          if (!action_available(v_e, a_e, p)) continue;
          if (successor_safe(s, a_e, winning)) allowed.push_back(static_cast<int>(ai));
        }
        if (allowed.empty())
          throw std::logic_error("synthesize_controller: winning state without safe action");
        auto it = label_index.find(allowed);
        int label;
        if (it == label_index.end()) {
          label = static_cast<int>(ds.label_table.size());
          label_index.emplace(allowed, label);
          ds.label_table.push_back(LabelSet{allowed});
        } else {
          label = it->second;
        }
        ds.columns[0].push_back(static_cast<double>(v_e));
        ds.columns[1].push_back(static_cast<double>(v_f));
        ds.columns[2].push_back(static_cast<double>(d_r));
        ds.row_labels.push_back(label);
      }
    }
  }
  if (ds.num_rows() == 0)
    throw std::runtime_error("synthesize_controller: empty winning region");
  return ds;
}

// Worst-case braking-distance areas behind the "can accelerate" rule: the
// ego accelerates for one period then brakes to v_min while the front car
// brakes to v_min immediately. a_min/a_max are the extreme accelerations.
//   A1: difference of the cars' braking-phase distances
//   A2: distance both cover at v_min until the ego finishes braking
//   A3: extra distance from the ego's one acceleration period
//   A4: distance the ego's higher starting speed adds during braking
inline std::array<double, 4> cruise_areas(const CruiseState& s, const CruiseParams& p) {
  const double a_min = -2.0;
  const double a_max = 2.0;
  const double t1 = static_cast<double>(p.t1);
  const double v_e = s.v_e;
  const double v_f = s.v_f;
  const double v_min = p.v_min;
  std::array<double, 4> areas{};
  areas[0] = -v_e * v_e / (2.0 * a_min) + v_f * v_f / (2.0 * a_min);
  areas[1] = v_min * (v_e - v_f) / a_min;
  areas[2] = a_max * t1 * t1 * (1.0 - a_max / a_min);
  areas[3] = (v_e - v_min) * t1 * (1.0 - a_max / a_min);
  return areas;
}

// Margin of the handcrafted acceleration rule: nonnegative means the ego
// can accelerate now and still never get closer than d_safe, assuming the
// front car brakes as hard as possible. Expanded, the margin is
//   1/(2 a_min) v_e^2 - 1/(2 a_min) v_f^2
//   - (v_min/a_min + t1 (1 - a_max/a_min)) v_e + (v_min/a_min) v_f
//   + d_r - (1 - a_max/a_min) t1 (t1 a_max - v_min) - d_safe.
inline double handcrafted_can_accelerate(const CruiseState& s, const CruiseParams& p) {
  auto areas = cruise_areas(s, p);
  double sum = areas[0] + areas[1] + areas[2] + areas[3];
  return static_cast<double>(s.d_r) - sum - static_cast<double>(p.d_safe);
}

// Coefficients of the margin on (v_e^2, v_f^2, v_e, v_f, d_r); the d_r
// coefficient is 1 by construction.
inline std::vector<double> handcrafted_coefficients(const CruiseParams& p) {
  const double a_min = -2.0;
  const double a_max = 2.0;
  const double t1 = static_cast<double>(p.t1);
  const double v_min = p.v_min;
  return {
      1.0 / (2.0 * a_min),
      -1.0 / (2.0 * a_min),
      -(v_min / a_min + t1 * (1.0 - a_max / a_min)),
      v_min / a_min,
      1.0,
  };
}

}  // namespace polydt
