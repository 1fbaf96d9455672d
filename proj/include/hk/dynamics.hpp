#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hk/state.hpp"

namespace hk {

struct SimParams {
  /// Largest per-step opinion change still counted as stationary.
  double fixed_point_tol = 1e-12;
  std::int64_t max_steps = 1'000'000;
  /// Full-state snapshot every `record_every` steps (t = 0 and the final state are always kept).
  std::int64_t record_every = 1;

  void validate() const {
    if (!(fixed_point_tol >= 0.0)) throw std::invalid_argument("fixed_point_tol must be >= 0");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
    if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  }
};

struct StepStats {
  std::int64_t time = 0;
  double max_change = 0.0;  // max_i |x_i(t+1) - x_i(t)|
  double min_opinion = 0.0;
  double max_opinion = 0.0;
  bool structurally_fixed = false;  // is_fixed_point(x(t), tol)
};

struct Trajectory {
  std::vector<OpinionState> snapshots;
  std::vector<StepStats> step_stats;
  double fixed_point_tol = 0.0;
};

enum class Termination { FixedPoint, MaxSteps };

struct SimResult {
  OpinionState final_state;
  bool converged = false;
  std::optional<std::int64_t> convergence_time;
  Termination termination = Termination::MaxSteps;
};

struct SimRun {
  SimResult result;
  Trajectory trajectory;
};

namespace detail {

/// Unevaluated sum hi + lo carrying roughly 106 significant bits.
struct DoubleDouble {
  double hi = 0.0;
  double lo = 0.0;
};

inline DoubleDouble two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

inline DoubleDouble add(DoubleDouble a, double b) {
  const DoubleDouble s = two_sum(a.hi, b);
  return two_sum(s.hi, s.lo + a.lo);
}

inline DoubleDouble sub(DoubleDouble a, DoubleDouble b) {
  const DoubleDouble s = two_sum(a.hi, -b.hi);
  return two_sum(s.hi, s.lo + (a.lo - b.lo));
}

/// a / b rounded to double, with one Newton-style correction from the remainder.
inline double divide(DoubleDouble a, DoubleDouble b) {
  const double q = a.hi / b.hi;
  const DoubleDouble prod = two_sum(q * b.hi, std::fma(q, b.hi, -(q * b.hi)));
  const double rem = ((a.hi - prod.hi) - prod.lo + a.lo) - q * b.lo;
  return q + rem / b.hi;
}

/// Running sums of a per-agent quantity that restart at every interaction
/// component, so a window sum never mixes mass from disconnected groups.
/// Kept in double-double: a window sum is then accurate far below one ulp
/// of its terms, and the mean of a symmetric window on an exact lattice
/// comes out exact.
class ComponentPrefix {
 public:
  ComponentPrefix(std::span<const double> x, std::span<const double> values)
      : cum_(x.size()), start_(x.size()) {
    std::size_t s = 0;
    DoubleDouble acc;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i > 0 && x[i] - x[i - 1] >= kConfidenceRadius) {
        s = i;
        acc = {};
      }
      acc = add(acc, values[i]);
      cum_[i] = acc;
      start_[i] = s;
    }
  }

  /// Sum over the closed range; lo and hi must share a component.
  [[nodiscard]] DoubleDouble range_dd(std::size_t lo, std::size_t hi) const {
    return lo > start_[lo] ? sub(cum_[hi], cum_[lo - 1]) : cum_[hi];
  }

  [[nodiscard]] double range(std::size_t lo, std::size_t hi) const {
    const DoubleDouble r = range_dd(lo, hi);
    return r.hi + r.lo;
  }

 private:
  std::vector<DoubleDouble> cum_;
  std::vector<std::size_t> start_;
};

inline std::vector<double> products(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

/// Calls f(i, lo, hi) with the neighbor window of every agent, in index order.
template <class F>
void for_each_window(std::span<const double> x, F&& f) {
  const std::size_t n = x.size();
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (x[i] - x[lo] >= kConfidenceRadius) ++lo;
    if (hi < i) hi = i;
    while (hi + 1 < n && x[hi + 1] - x[i] < kConfidenceRadius) ++hi;
    f(i, lo, hi);
  }
}

/// Shared tail of both update paths: window average from component sums,
/// clamped to the window's value range, then forced monotone across agents.
/// Both clamps are satisfied by the exact average; they only absorb rounding.
class WindowAverager {
 public:
  explicit WindowAverager(const OpinionState& s)
      : x_(s.opinions()),
        mass_(x_, s.weights()),
        moment_(x_, products(s.opinions(), s.weights())),
        out_(s.size()) {}

  void set(std::size_t i, std::size_t lo, std::size_t hi) {
    const double avg = divide(moment_.range_dd(lo, hi), mass_.range_dd(lo, hi));
    out_[i] = std::clamp(avg, x_[lo], x_[hi]);
  }

  std::vector<double> finish() {
    for (std::size_t i = 1; i < out_.size(); ++i) out_[i] = std::max(out_[i], out_[i - 1]);
    return std::move(out_);
  }

 private:
  std::span<const double> x_;
  ComponentPrefix mass_;
  ComponentPrefix moment_;
  std::vector<double> out_;
};

}  // namespace detail

/// Maximal index range of agents strictly closer than the radius to agent i.
inline IndexRange neighbor_window(const OpinionState& state, std::size_t i) {
  if (i >= state.size()) throw std::out_of_range("agent index out of range");
  const auto x = state.opinions();
  const double xi = x[i];
  const auto lo_it = std::partition_point(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(i),
                                          [xi](double v) { return xi - v >= kConfidenceRadius; });
  const auto hi_it = std::partition_point(x.begin() + static_cast<std::ptrdiff_t>(i), x.end(),
                                          [xi](double v) { return v - xi < kConfidenceRadius; });
  return {static_cast<std::size_t>(lo_it - x.begin()), static_cast<std::size_t>(hi_it - x.begin()) - 1};
}

/// One synchronous update: every agent moves to the weighted mean of its window. O(n).
inline OpinionState step(const OpinionState& state) {
  detail::WindowAverager avg(state);
  detail::for_each_window(state.opinions(),
                          [&](std::size_t i, std::size_t lo, std::size_t hi) { avg.set(i, lo, hi); });
  return state.advanced(avg.finish());
}

/// Reference update: neighbor sets found by an explicit all-pairs scan. O(n^2).
/// Shares the summation path with step() so the two agree bitwise.
inline OpinionState step_naive(const OpinionState& state) {
  const auto x = state.opinions();
  const std::size_t n = x.size();
  detail::WindowAverager avg(state);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = n;
    std::size_t hi = 0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(x[i] - x[j]) < kConfidenceRadius) {
        lo = std::min(lo, j);
        hi = std::max(hi, j);
        ++count;
      }
    }
    if (count != hi - lo + 1) throw std::logic_error("neighbor set is not contiguous; state unsorted?");
    avg.set(i, lo, hi);
  }
  return state.advanced(avg.finish());
}

/// True iff the opinions split into groups of spread <= tol whose consecutive
/// separations are all >= 1 - tol.
inline bool is_fixed_point(const OpinionState& state, double tol) {
  const auto x = state.opinions();
  std::size_t start = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] - x[start] <= tol) continue;
    if (x[i] - x[i - 1] < kConfidenceRadius - tol) return false;
    start = i;
  }
  return true;
}

inline double max_abs_change(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Iterates step() until the state is a certified fixed point or max_steps is reached.
inline SimRun simulate(const OpinionState& initial, const SimParams& params) {
  params.validate();
  SimRun run;
  run.trajectory.fixed_point_tol = params.fixed_point_tol;
  run.trajectory.snapshots.push_back(initial);

  OpinionState cur = initial;
  const std::int64_t t0 = initial.time();
  for (std::int64_t k = 0;; ++k) {
    OpinionState next = step(cur);
    const double change = max_abs_change(cur.opinions(), next.opinions());
    const bool structural = is_fixed_point(cur, params.fixed_point_tol);
    run.trajectory.step_stats.push_back({cur.time(), change, cur.min_opinion(), cur.max_opinion(), structural});
    if (change <= params.fixed_point_tol && structural) {
      run.result.converged = true;
      run.result.convergence_time = cur.time() - t0;
      run.result.termination = Termination::FixedPoint;
      break;
    }
    if (k == params.max_steps) {
      run.result.termination = Termination::MaxSteps;
      break;
    }
    cur = std::move(next);
    if ((k + 1) % params.record_every == 0) run.trajectory.snapshots.push_back(cur);
  }
  if (run.trajectory.snapshots.back().time() != cur.time()) run.trajectory.snapshots.push_back(cur);
  run.result.final_state = std::move(cur);
  return run;
}

/// Fixed-horizon run without a stopping rule. Snapshots at multiples of
/// record_every plus the final step.
inline Trajectory run_steps(const OpinionState& initial, std::int64_t steps, std::int64_t record_every = 1) {
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  Trajectory traj;
  traj.snapshots.push_back(initial);
  OpinionState cur = initial;
  for (std::int64_t k = 0; k < steps; ++k) {
    OpinionState next = step(cur);
    traj.step_stats.push_back({cur.time(), max_abs_change(cur.opinions(), next.opinions()), cur.min_opinion(),
                               cur.max_opinion(), is_fixed_point(cur, traj.fixed_point_tol)});
    cur = std::move(next);
    if ((k + 1) % record_every == 0 || k + 1 == steps) traj.snapshots.push_back(cur);
  }
  return traj;
}

}  // namespace hk
