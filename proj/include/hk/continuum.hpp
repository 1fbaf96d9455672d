#pragma once

// Operator view of the measure-averaging dynamics. A weighted OpinionState is
// read as a piecewise-constant opinion function on the agent index set, with
// agent i occupying mass w_i; inner products are weighted accordingly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "hk/density.hpp"
#include "hk/dynamics.hpp"
#include "hk/random.hpp"
#include "hk/state.hpp"

namespace hk {

namespace detail {

inline void require_length(const OpinionState& s, std::span<const double> y) {
  if (y.size() != s.size()) throw std::invalid_argument("vector length does not match the number of agents");
}

/// sum_{j in window(i)} w_j v_j for every agent.
inline std::vector<double> window_sums(const OpinionState& s, std::span<const double> v) {
  const ComponentPrefix prefix(s.opinions(), products(s.weights(), v));
  std::vector<double> out(s.size());
  for_each_window(s.opinions(), [&](std::size_t i, std::size_t lo, std::size_t hi) { out[i] = prefix.range(lo, hi); });
  return out;
}

/// Opinions shifted by the first opinion of their interaction component.
inline std::vector<double> component_centered(std::span<const double> x) {
  std::vector<double> z(x.size());
  for (const auto& r : interaction_components(x)) {
    for (std::size_t i = r.lo; i <= r.hi; ++i) z[i] = x[i] - x[r.lo];
  }
  return z;
}

inline std::vector<double> squares(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * v[i];
  return out;
}

}  // namespace detail

/// Weighted scalar product sum_i w_i a_i b_i.
inline double inner(const OpinionState& s, std::span<const double> a, std::span<const double> b) {
  detail::require_length(s, a);
  detail::require_length(s, b);
  const auto w = s.weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += w[i] * a[i] * b[i];
  return acc;
}

/// Mass of each agent's neighbor window.
inline std::vector<double> degree(const OpinionState& s) {
  return detail::window_sums(s, std::vector<double>(s.size(), 1.0));
}

inline std::vector<double> adjacency_apply(const OpinionState& s, std::span<const double> y) {
  detail::require_length(s, y);
  return detail::window_sums(s, y);
}

/// (L_x y)_i = d_i y_i - (A_x y)_i.
inline std::vector<double> laplacian_apply(const OpinionState& s, std::span<const double> y) {
  const auto d = degree(s);
  auto out = adjacency_apply(s, y);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = d[i] * y[i] - out[i];
  return out;
}

struct LaplacianResidual {
  std::vector<double> residual;  // L_x x
  /// max_i |(step(x) - x)_i + (L_x x)_i / d_i|
  double identity_error = 0.0;
};

/// L_x x together with a check of step(x) - x = -D^-1 L_x x.
inline LaplacianResidual laplacian_residual(const OpinionState& s) {
  LaplacianResidual out;
  out.residual = laplacian_apply(s, s.opinions());
  const auto d = degree(s);
  const auto next = step(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double lhs = next.opinion(i) - s.opinion(i);
    out.identity_error = std::max(out.identity_error, std::abs(lhs + out.residual[i] / d[i]));
  }
  return out;
}

/// (1/2) sum_i sum_{j in window(i)} w_i w_j (y_i + sign * y_j)^2, with sign = +1 or -1.
/// Equals <y, (D_x + sign * A_x) y>.
inline double window_quadratic_form(const OpinionState& s, std::span<const double> y, int sign) {
  detail::require_length(s, y);
  if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
  const auto w = s.weights();
  const auto d = degree(s);
  const auto a1 = detail::window_sums(s, y);
  const auto a2 = detail::window_sums(s, detail::squares(y));
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    acc += w[i] * (d[i] * y[i] * y[i] + 2.0 * sign * y[i] * a1[i] + a2[i]);
  }
  return 0.5 * acc;
}

/// sum_i w_i (mass left of window(i) + mass right of window(i)): mass of
/// ordered non-neighbor pairs. Exactly zero when every pair is linked.
inline double non_neighbor_pair_mass(const OpinionState& s) {
  const auto w = s.weights();
  const std::size_t n = w.size();
  std::vector<double> left(n + 1, 0.0);
  std::vector<double> right(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) left[i + 1] = left[i] + w[i];
  for (std::size_t i = n; i-- > 0;) right[i] = right[i + 1] + w[i];
  double acc = 0.0;
  detail::for_each_window(s.opinions(), [&](std::size_t i, std::size_t lo, std::size_t hi) {
    acc += w[i] * (left[lo] + right[hi + 1]);
  });
  return acc;
}

/// V(x) = (1/2) sum_ij w_i w_j min(1, (x_i - x_j)^2), in O(n).
inline double potential(const OpinionState& s) {
  const auto z = detail::component_centered(s.opinions());
  const auto w = s.weights();
  const auto d = degree(s);
  const auto s1 = detail::window_sums(s, z);
  const auto s2 = detail::window_sums(s, detail::squares(z));
  double near = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) near += w[i] * (d[i] * z[i] * z[i] - 2.0 * z[i] * s1[i] + s2[i]);
  return 0.5 * (near + non_neighbor_pair_mass(s));
}

struct LyapunovCheck {
  double potential_before = 0.0;
  double dV = 0.0;     // V(step(x)) - V(x)
  double bound = 0.0;  // -<dx, (A_x + D_x) dx>, never positive
  bool holds = false;  // dV <= bound + 1e-9 max(1, |V|)
};

inline LyapunovCheck lyapunov_decrement(const OpinionState& s) {
  const OpinionState next = step(s);
  std::vector<double> dx(s.size());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = next.opinion(i) - s.opinion(i);
  LyapunovCheck c;
  c.potential_before = potential(s);
  c.dV = potential(next) - c.potential_before;
  c.bound = -window_quadratic_form(s, dx, +1);
  c.holds = c.dV <= c.bound + 1e-9 * std::max(1.0, std::abs(c.potential_before));
  return c;
}

/// <y, L_x y>. Nonnegative up to rounding.
/// <y, L_x y>. L_x kills constants on each interaction component, so y is
/// shifted per component first.
inline double psd_check(const OpinionState& s, std::span<const double> y) {
  detail::require_length(s, y);
  std::vector<double> z(y.begin(), y.end());
  for (const auto& r : interaction_components(s.opinions())) {
    const double base = y[r.lo];
    for (std::size_t i = r.lo; i <= r.hi; ++i) z[i] = y[i] - base;
  }
  return inner(s, z, laplacian_apply(s, z));
}

struct RegularityBounds {
  double m_hat = 0.0;  // min over windows of mass / width
  double M_hat = 0.0;  // max over windows of mass / width
  double window = 0.0;

  [[nodiscard]] bool regular() const noexcept { return m_hat > 0.0 && M_hat >= m_hat; }
};

/// Empirical density bounds over all intervals of the given width inside
/// [min opinion, max opinion]. Upper bound uses closed intervals, lower bound open ones.
inline RegularityBounds regularity_bounds(const OpinionState& s, double window) {
  if (!(window > 0.0)) throw std::invalid_argument("window must be positive");
  const auto x = s.opinions();
  const auto w = s.weights();
  const double lo = s.min_opinion();
  const double hi = s.max_opinion();
  if (hi - lo < window) throw std::invalid_argument("opinion span is smaller than the window");

  std::vector<double> cum(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) cum[i + 1] = cum[i] + w[i];
  auto idx_lower = [&](double v) { return static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), v) - x.begin()); };
  auto idx_upper = [&](double v) { return static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), v) - x.begin()); };
  auto closed_mass = [&](double a) { return cum[idx_upper(a + window)] - cum[idx_lower(a)]; };
  auto open_mass = [&](double a) {
    const std::size_t l = idx_upper(a);
    const std::size_t r = idx_lower(a + window);
    return r > l ? cum[r] - cum[l] : 0.0;
  };

  const double last_start = hi - window;
  std::vector<double> starts{lo, last_start};
  for (double v : x) {
    if (v <= last_start) starts.push_back(v);
    if (v - window >= lo && v - window <= last_start) starts.push_back(v - window);
  }
  double min_mass = std::numeric_limits<double>::infinity();
  double max_mass = 0.0;
  for (double a : starts) {
    min_mass = std::min(min_mass, open_mass(a));
    max_mass = std::max(max_mass, closed_mass(a));
  }
  return {min_mass / window, max_mass / window, window};
}

struct WitnessAtom {
  double value = 0.0;
  double mass = 0.0;
};

struct MuMetricReport {
  /// Smallest eps with mass{|x - s| >= eps} < eps for the constructed s.
  /// An upper bound on the distance to the fixed-point set.
  double epsilon_star = 0.0;
  std::vector<WitnessAtom> witness;  // the profile s, values >= 1 apart
};

/// Builds s in F greedily (heaviest unit-width balls first, centers >= 1 apart,
/// every agent mapped to its nearest center) and measures |x - s| in measure.
inline MuMetricReport distance_to_F(const OpinionState& s) {
  const auto x = s.opinions();
  const auto w = s.weights();
  const double total = s.total_weight();
  std::vector<double> cum(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) cum[i + 1] = cum[i] + w[i] / total;

  struct Candidate {
    double value, mass;
  };
  std::vector<Candidate> cand;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i > 0 && x[i] == x[i - 1]) continue;
    const auto l = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), x[i] - 0.5) - x.begin());
    const auto r = static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), x[i] + 0.5) - x.begin());
    cand.push_back({x[i], cum[r] - cum[l]});
  }
  std::stable_sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) { return a.mass > b.mass; });

  std::set<double> centers;
  for (const auto& c : cand) {
    const auto it = centers.lower_bound(c.value);
    if (it != centers.end() && *it - c.value < 1.0) continue;
    if (it != centers.begin() && c.value - *std::prev(it) < 1.0) continue;
    centers.insert(c.value);
  }

  const std::vector<double> cv(centers.begin(), centers.end());
  MuMetricReport rep;
  for (double v : cv) rep.witness.push_back({v, 0.0});
  struct Dev {
    double dist, mass;
  };
  std::vector<Dev> devs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto it = std::lower_bound(cv.begin(), cv.end(), x[i]);
    std::size_t k = static_cast<std::size_t>(it - cv.begin());
    if (k == cv.size() || (k > 0 && x[i] - cv[k - 1] <= cv[k] - x[i])) --k;
    rep.witness[k].mass += w[i] / total;
    devs[i] = {std::abs(x[i] - cv[k]), w[i] / total};
  }

  // f(eps) = mass{dev >= eps} is a nonincreasing step function; find inf{eps : f(eps) < eps}.
  std::sort(devs.begin(), devs.end(), [](const Dev& a, const Dev& b) { return a.dist > b.dist; });
  double best = devs.empty() ? 0.0 : devs.front().dist;
  double above = 0.0;  // mass with dev >= current distinct value
  for (std::size_t k = 0; k < devs.size();) {
    const double dk = devs[k].dist;
    while (k < devs.size() && devs[k].dist == dk) above += devs[k++].mass;
    const double next = k < devs.size() ? devs[k].dist : 0.0;
    // on (next, dk] the tail mass is `above`
    if (above < dk) best = std::min(best, std::max(next, above));
  }
  rep.epsilon_star = best;
  return rep;
}

/// Updated opinion of an agent holding opinion a: mean over (a - 1, a + 1).
/// Returns a unchanged if nobody is in range.
inline double updated_opinion(const OpinionState& s, double a) {
  double mass = 0.0;
  double moment = 0.0;
  const auto x = s.opinions();
  const auto w = s.weights();
  const auto first = std::upper_bound(x.begin(), x.end(), a - kConfidenceRadius);
  for (auto it = first; it != x.end() && *it - a < kConfidenceRadius; ++it) {
    if (std::abs(*it - a) >= kConfidenceRadius) continue;
    const auto i = static_cast<std::size_t>(it - x.begin());
    mass += w[i];
    moment += w[i] * x[i];
  }
  return mass > 0.0 ? moment / mass : a;
}

struct ContinuityReport {
  double max_response = 0.0;  // max over trials of ||U(y) - U(x)||_inf
  double bound = 0.0;         // (1 + 24 M/m) delta
  RegularityBounds regularity;
};

/// Sup-norm response of one update to random order-preserving perturbations
/// of size at most delta.
inline ContinuityReport continuity_probe(const OpinionState& s, double delta, int trials, std::uint64_t seed,
                                         double window = 0.5) {
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  ContinuityReport rep;
  rep.regularity = regularity_bounds(s, window);
  if (!rep.regularity.regular()) throw std::invalid_argument("state is not regular at this window");
  rep.bound = (1.0 + 24.0 * rep.regularity.M_hat / rep.regularity.m_hat) * delta;

  const OpinionState base = step(s);
  SeededGenerator gen(seed);
  std::vector<double> y(s.size());
  for (int t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = s.opinion(i) + gen.uniform(-delta, delta);
      if (i > 0) y[i] = std::max(y[i], y[i - 1]);
    }
    const OpinionState moved = step(OpinionState(y, std::vector<double>(s.weights().begin(), s.weights().end())));
    rep.max_response = std::max(rep.max_response, max_abs_change(base.opinions(), moved.opinions()));
  }
  return rep;
}

/// sup over the index interval [0, 1) of |G a - G b|, where agent i of an
/// n-vector owns the cell [i/n, (i+1)/n).
inline double cellwise_sup_distance(std::span<const double> a, std::span<const double> b) {
  const std::uint64_t n = a.size();
  const std::uint64_t m = b.size();
  std::uint64_t i = 0;
  std::uint64_t k = 0;
  double sup = 0.0;
  while (i < n && k < m) {
    sup = std::max(sup, std::abs(a[i] - b[k]));
    const std::uint64_t end_a = (i + 1) * m;
    const std::uint64_t end_b = (k + 1) * n;
    if (end_a <= end_b) ++i;
    if (end_b <= end_a) ++k;
  }
  return sup;
}

struct RefineReport {
  bool applicable = true;
  std::vector<std::size_t> ns;
  std::vector<double> errors;        // vs the largest n
  std::vector<double> min_span;      // smallest opinion span seen over the horizon, per n
};

/// Runs quantile discretizations of one density for a fixed horizon and
/// compares each against the finest. Requires span > 2 throughout.
inline RefineReport refine_compare(const DensitySpec& density, const std::vector<std::size_t>& n_list,
                                   std::int64_t horizon) {
  if (n_list.empty()) throw std::invalid_argument("n_list is empty");
  for (std::size_t k = 1; k < n_list.size(); ++k) {
    if (n_list[k] <= n_list[k - 1]) throw std::invalid_argument("n_list must be strictly increasing");
  }
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  RefineReport rep;
  rep.ns = n_list;
  std::vector<OpinionState> finals;
  for (std::size_t n : n_list) {
    OpinionState cur = discretize(density, n);
    double min_span = cur.span_width();
    for (std::int64_t t = 0; t < horizon; ++t) {
      cur = step(cur);
      min_span = std::min(min_span, cur.span_width());
    }
    rep.min_span.push_back(min_span);
    if (!(min_span > 2.0)) rep.applicable = false;
    finals.push_back(std::move(cur));
  }
  for (const auto& f : finals) rep.errors.push_back(cellwise_sup_distance(f.opinions(), finals.back().opinions()));
  return rep;
}

}  // namespace hk
