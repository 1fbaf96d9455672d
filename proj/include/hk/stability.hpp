#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hk/clustering.hpp"
#include "hk/dynamics.hpp"
#include "hk/parallel.hpp"
#include "hk/state.hpp"

namespace hk {

enum class PairVerdict { Stable, Unstable, Boundary };

inline const char* to_string(PairVerdict v) {
  switch (v) {
    case PairVerdict::Stable: return "Stable";
    case PairVerdict::Unstable: return "Unstable";
    case PairVerdict::Boundary: return "Boundary";
  }
  return "?";
}

/// Smallest stable separation for two clusters with the given weights:
/// 2 when equal (inclusive), 1 + min/max otherwise (exclusive).
inline double separation_bound(double w_a, double w_b) {
  return 1.0 + std::min(w_a, w_b) / std::max(w_a, w_b);
}

/// Stability rule for one pair of clusters at distance d.
///
/// Equal weights need d >= 2. Unequal weights need d > 1 + min/max strictly;
/// d exactly on that bound is reported as Boundary (it is not stable).
inline PairVerdict pair_condition(double w_a, double w_b, double d) {
  if (!(w_a > 0.0) || !(w_b > 0.0) || !(d > 0.0) || !std::isfinite(w_a) || !std::isfinite(w_b) ||
      !std::isfinite(d)) {
    throw std::invalid_argument("pair_condition requires positive finite weights and distance");
  }
  if (w_a == w_b) return d >= 2.0 ? PairVerdict::Stable : PairVerdict::Unstable;
  const double bound = separation_bound(w_a, w_b);
  if (d > bound) return PairVerdict::Stable;
  if (d == bound) return PairVerdict::Boundary;
  return PairVerdict::Unstable;
}

/// True iff the pair's center of mass is farther than 1 from one of the two clusters.
inline bool center_of_mass_test(double x_a, double x_b, double w_a, double w_b) {
  const double m = (w_a * x_a + w_b * x_b) / (w_a + w_b);
  return std::max(std::abs(m - x_a), std::abs(m - x_b)) > 1.0;
}

enum class StabilityStatus { Stable, Unstable, Boundary };

inline const char* to_string(StabilityStatus s) {
  switch (s) {
    case StabilityStatus::Stable: return "Stable";
    case StabilityStatus::Unstable: return "Unstable";
    case StabilityStatus::Boundary: return "Boundary";
  }
  return "?";
}

struct PairViolation {
  std::size_t a = 0;
  std::size_t b = 0;
  double distance = 0.0;
  double bound = 0.0;
};

struct StabilityVerdict {
  StabilityStatus status = StabilityStatus::Stable;
  std::vector<PairViolation> violations;      // strict failures
  std::vector<PairViolation> boundary_pairs;  // exactly on the unequal-weight bound

  [[nodiscard]] bool stable() const noexcept { return status == StabilityStatus::Stable; }
};

/// Applies pair_condition to every cluster pair closer than 2.
inline StabilityVerdict classify(const Equilibrium& eq) {
  StabilityVerdict v;
  const auto& c = eq.clusters;
  for (std::size_t a = 0; a < c.size(); ++a) {
    for (std::size_t b = a + 1; b < c.size(); ++b) {
      const double d = std::abs(c[b].position - c[a].position);
      if (d >= 2.0) continue;
      const double bound = c[a].weight == c[b].weight ? 2.0 : separation_bound(c[a].weight, c[b].weight);
      switch (pair_condition(c[a].weight, c[b].weight, d)) {
        case PairVerdict::Stable: break;
        case PairVerdict::Unstable: v.violations.push_back({a, b, d, bound}); break;
        case PairVerdict::Boundary: v.boundary_pairs.push_back({a, b, d, bound}); break;
      }
    }
  }
  if (!v.violations.empty()) {
    v.status = StabilityStatus::Unstable;
  } else if (!v.boundary_pairs.empty()) {
    v.status = StabilityStatus::Boundary;
  }
  return v;
}

struct PerturbationResult {
  double perturber_position = 0.0;
  double delta = 0.0;
  double displacement = 0.0;  // sum_i w_i |x_i - x'_i| over the original agents
  bool merged = false;
  bool converged = true;
};

/// Inserts one agent of weight delta at x0, runs to the new fixed point,
/// removes the agent again and measures how far the original clusters moved.
inline PerturbationResult perturb_and_measure(const Equilibrium& eq, double x0, double delta,
                                              const SimParams& params) {
  if (!(delta > 0.0)) throw std::invalid_argument("perturber weight must be positive");
  if (eq.clusters.empty()) throw std::invalid_argument("equilibrium has no clusters");
  std::vector<double> x;
  std::vector<double> w;
  std::size_t slot = eq.clusters.size();
  for (std::size_t k = 0; k < eq.clusters.size(); ++k) {
    if (slot == eq.clusters.size() && x0 < eq.clusters[k].position) {
      slot = k;
      x.push_back(x0);
      w.push_back(delta);
    }
    x.push_back(eq.clusters[k].position);
    w.push_back(eq.clusters[k].weight);
  }
  if (slot == eq.clusters.size()) {
    x.push_back(x0);
    w.push_back(delta);
  }

  SimParams p = params;
  p.record_every = p.max_steps;
  const SimRun run = simulate(OpinionState(std::move(x), std::move(w)), p);
  const auto xf = run.result.final_state.opinions();

  PerturbationResult r{x0, delta, 0.0, false, run.result.converged};
  std::vector<double> after;
  std::vector<double> after_w;
  for (std::size_t k = 0, j = 0; k < xf.size(); ++k) {
    if (k == slot) continue;
    const auto& c = eq.clusters[j++];
    r.displacement += c.weight * std::abs(c.position - xf[k]);
    after.push_back(xf[k]);
    after_w.push_back(c.weight);
  }
  r.merged = detect_clusters(OpinionState(std::move(after), std::move(after_w))).size() < eq.clusters.size();
  return r;
}

enum class EmpiricalVerdict { Stable, Unstable, Inconclusive };

inline const char* to_string(EmpiricalVerdict v) {
  switch (v) {
    case EmpiricalVerdict::Stable: return "Stable";
    case EmpiricalVerdict::Unstable: return "Unstable";
    case EmpiricalVerdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct SupDisplacementRow {
  double delta = 0.0;
  double sup_displacement = 0.0;
  double argsup_position = 0.0;
  bool all_converged = true;
};

struct EmpiricalStability {
  EmpiricalVerdict verdict = EmpiricalVerdict::Inconclusive;
  std::vector<SupDisplacementRow> table;
};

struct EmpiricalOptions {
  double grid_step = 0.01;
  std::vector<double> deltas{1e-2, 1e-3, 1e-4};
  /// Final sup displacement below this counts as "vanishing".
  double stability_eps = 1e-2;
};

/// Perturber positions on a regular grid over [min cluster - 1, max cluster + 1].
inline std::vector<double> perturber_grid(const Equilibrium& eq, double grid_step) {
  if (!(grid_step > 0.0)) throw std::invalid_argument("grid_step must be positive");
  const double lo = eq.clusters.front().position - 1.0;
  const double hi = eq.clusters.back().position + 1.0;
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / grid_step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t k = 0; k < count; ++k) grid[k] = lo + static_cast<double>(k) * grid_step;
  return grid;
}

/// Sup over perturber positions of the equilibrium displacement, for each
/// perturber weight in a decreasing schedule.
inline EmpiricalStability empirical_stability(const Equilibrium& eq, const EmpiricalOptions& opt,
                                              const SimParams& params) {
  if (eq.clusters.empty()) throw std::invalid_argument("equilibrium has no clusters");
  if (opt.deltas.empty()) throw std::invalid_argument("delta schedule is empty");
  for (std::size_t k = 0; k < opt.deltas.size(); ++k) {
    if (!(opt.deltas[k] > 0.0) || (k > 0 && !(opt.deltas[k] < opt.deltas[k - 1]))) {
      throw std::invalid_argument("deltas must be positive and strictly decreasing");
    }
  }
  const auto grid = perturber_grid(eq, opt.grid_step);
  const std::size_t cells = grid.size() * opt.deltas.size();
  const auto results = parallel_map<PerturbationResult>(cells, [&](std::size_t k) {
    return perturb_and_measure(eq, grid[k % grid.size()], opt.deltas[k / grid.size()], params);
  });

  EmpiricalStability out;
  for (std::size_t d = 0; d < opt.deltas.size(); ++d) {
    SupDisplacementRow row{opt.deltas[d], -1.0, 0.0, true};
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto& r = results[d * grid.size() + g];
      row.all_converged = row.all_converged && r.converged;
      if (r.displacement > row.sup_displacement) {
        row.sup_displacement = r.displacement;
        row.argsup_position = r.perturber_position;
      }
    }
    out.table.push_back(row);
  }

  bool monotone = true;
  for (std::size_t k = 1; k < out.table.size(); ++k) {
    monotone = monotone && out.table[k].sup_displacement <= out.table[k - 1].sup_displacement;
  }
  const double last = out.table.back().sup_displacement;
  if (classify(eq).status == StabilityStatus::Boundary) {
    out.verdict = EmpiricalVerdict::Inconclusive;
  } else if (last < opt.stability_eps && monotone) {
    out.verdict = EmpiricalVerdict::Stable;
  } else if (last >= opt.stability_eps) {
    out.verdict = EmpiricalVerdict::Unstable;
  }
  return out;
}

struct MetastableOptions {
  double drift_eps = 1e-3;
  std::int64_t min_len = 10;
  /// Agents closer than this are chained into one group.
  double group_gap = 0.1;
  /// Bridge mass must stay below this fraction of the lighter group.
  double bridge_fraction = 0.05;
};

struct MetastablePhase {
  std::int64_t start = 0;
  std::int64_t end = 0;
  double gap_at_start = 0.0;
  double gap_at_end = 0.0;
  bool ends_in_merge = false;
};

namespace detail {

struct MacroGroups {
  bool ok = false;
  double left = 0.0;
  double right = 0.0;
  std::size_t left_first = 0;
  std::size_t right_last = 0;
};

inline MacroGroups macro_groups(const OpinionState& s, const MetastableOptions& opt) {
  const auto x = s.opinions();
  const auto w = s.weights();
  struct Group {
    std::size_t lo, hi;
    double mass, pos;
  };
  std::vector<Group> groups;
  std::size_t start = 0;
  auto close = [&](std::size_t end) {
    double m = 0.0, mx = 0.0;
    for (std::size_t k = start; k <= end; ++k) {
      m += w[k];
      mx += w[k] * x[k];
    }
    groups.push_back({start, end, m, mx / m});
  };
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] - x[i - 1] > opt.group_gap) {
      close(i - 1);
      start = i;
    }
  }
  close(x.size() - 1);
  if (groups.size() < 3) return {};

  const Group& a = groups.front();
  const Group& b = groups.back();
  double bridge = 0.0;
  for (std::size_t g = 1; g + 1 < groups.size(); ++g) bridge += groups[g].mass;
  const double gap = b.pos - a.pos;
  if (!(bridge < opt.bridge_fraction * std::min(a.mass, b.mass))) return {};
  if (!(gap > 1.0 && gap < 2.0)) return {};
  return {true, a.pos, b.pos, a.lo, b.hi};
}

}  // namespace detail

/// Finds maximal stretches where two heavy groups 1..2 apart are held by a
/// light bridge of agents between them and drift slowly.
/// Expects consecutive snapshots one step apart.
inline std::vector<MetastablePhase> metastable_scan(const Trajectory& traj, const MetastableOptions& opt) {
  std::vector<MetastablePhase> phases;
  const auto& snaps = traj.snapshots;
  if (snaps.size() < 2) return phases;

  const auto final_clusters = detect_clusters(snaps.back());
  auto same_final_cluster = [&](std::size_t i, std::size_t j) {
    for (const auto& c : final_clusters) {
      if (c.members.lo <= i && i <= c.members.hi) return c.members.lo <= j && j <= c.members.hi;
    }
    return false;
  };

  std::vector<detail::MacroGroups> mg(snaps.size());
  for (std::size_t k = 0; k < snaps.size(); ++k) mg[k] = detail::macro_groups(snaps[k], opt);

  std::int64_t run_start = -1;
  auto flush = [&](std::size_t last) {
    if (run_start < 0) return;
    const auto first = static_cast<std::size_t>(run_start);
    const std::int64_t len = snaps[last].time() - snaps[first].time() + 1;
    if (len >= opt.min_len) {
      phases.push_back({snaps[first].time(), snaps[last].time(), mg[first].right - mg[first].left,
                        mg[last].right - mg[last].left,
                        same_final_cluster(mg[last].left_first, mg[last].right_last)});
    }
    run_start = -1;
  };

  for (std::size_t k = 0; k + 1 < snaps.size(); ++k) {
    const auto dt = static_cast<double>(snaps[k + 1].time() - snaps[k].time());
    const bool quiet = mg[k].ok && mg[k + 1].ok && dt > 0 &&
                       std::abs(mg[k + 1].left - mg[k].left) / dt < opt.drift_eps &&
                       std::abs(mg[k + 1].right - mg[k].right) / dt < opt.drift_eps;
    if (quiet) {
      if (run_start < 0) run_start = static_cast<std::int64_t>(k);
    } else if (run_start >= 0) {
      flush(k);
    }
  }
  if (run_start >= 0) flush(snaps.size() - 1);
  return phases;
}

}  // namespace hk
