#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hk/clustering.hpp"
#include "hk/density.hpp"
#include "hk/dynamics.hpp"
#include "hk/parallel.hpp"
#include "hk/random.hpp"
#include "hk/stability.hpp"
#include "hk/state.hpp"

namespace hk {

struct SweepRow {
  double L = 0.0;
  std::size_t n = 0;
  std::vector<double> positions;  // relative to L/2
  std::vector<double> weights;
  std::int64_t convergence_time = -1;  // -1 when max_steps was hit
};

/// For each L on the grid, uniformly spaced agents on [0, L] run to equilibrium.
inline std::vector<SweepRow> bifurcation_sweep(double L_min, double L_max, double L_step, double agents_per_unit,
                                               const SimParams& params) {
  if (!(L_min > 0.0 && L_min <= L_max)) throw std::invalid_argument("need 0 < L_min <= L_max");
  if (!(L_step > 0.0)) throw std::invalid_argument("L_step must be positive");
  if (!(agents_per_unit > 0.0)) throw std::invalid_argument("agents_per_unit must be positive");
  const auto count = static_cast<std::size_t>(std::floor((L_max - L_min) / L_step + 1e-9)) + 1;
  SimParams p = params;
  p.record_every = p.max_steps;
  return parallel_map<SweepRow>(count, [&](std::size_t k) {
    SweepRow row;
    row.L = L_min + static_cast<double>(k) * L_step;
    row.n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(agents_per_unit * row.L)));
    const SimRun run = simulate(uniform_spacing(row.L, row.n), p);
    for (const auto& c : detect_clusters(run.result.final_state)) {
      row.positions.push_back(c.position - 0.5 * row.L);
      row.weights.push_back(c.weight);
    }
    if (run.result.converged) row.convergence_time = *run.result.convergence_time;
    return row;
  });
}

/// Smallest L in the sweep with at least two clusters.
inline std::optional<double> first_multi_cluster_L(const std::vector<SweepRow>& rows) {
  for (const auto& r : rows) {
    if (r.positions.size() >= 2) return r.L;
  }
  return std::nullopt;
}

struct SingleClusterBoundReport {
  double L = 0.0;
  std::size_t n = 0;
  double min_after_1 = 0.0;
  double max_after_1 = 0.0;
  double min_after_2 = 0.0;
  double max_after_2 = 0.0;
  bool step1_within = false;  // [1/2 - slack, L - 1/2 + slack]
  bool step2_within = false;  // [11/12 - slack, L - 11/12 + slack]
  /// After two steps everyone is within 1 of the middle agent, which never moves.
  bool certified_single_cluster = false;
  double middle_max_deviation = 0.0;  // max_t |x_mid(t) - L/2|
  std::size_t final_clusters = 0;
  double final_position = 0.0;
  bool converged = false;
};

inline SingleClusterBoundReport single_cluster_bound_check(double L, std::size_t n, double slack = 0.01,
                                                           const SimParams& params = {}) {
  if (n % 2 == 0) throw std::invalid_argument("single_cluster_bound_check needs an odd number of agents");
  SingleClusterBoundReport r;
  r.L = L;
  r.n = n;
  const std::size_t mid = n / 2;
  const OpinionState x0 = uniform_spacing(L, n);
  const OpinionState x1 = step(x0);
  const OpinionState x2 = step(x1);
  r.min_after_1 = x1.min_opinion();
  r.max_after_1 = x1.max_opinion();
  r.min_after_2 = x2.min_opinion();
  r.max_after_2 = x2.max_opinion();
  r.step1_within = r.min_after_1 >= 0.5 - slack && r.max_after_1 <= L - 0.5 + slack;
  r.step2_within = r.min_after_2 >= 11.0 / 12.0 - slack && r.max_after_2 <= L - 11.0 / 12.0 + slack;
  r.certified_single_cluster = r.max_after_2 - 0.5 * L < 1.0 && 0.5 * L - r.min_after_2 < 1.0;

  SimParams p = params;
  p.record_every = 1;
  const SimRun run = simulate(x0, p);
  for (const auto& s : run.trajectory.snapshots) {
    r.middle_max_deviation = std::max(r.middle_max_deviation, std::abs(s.opinion(mid) - 0.5 * L));
  }
  const auto clusters = detect_clusters(run.result.final_state);
  r.final_clusters = clusters.size();
  r.final_position = clusters.front().position;
  r.converged = run.result.converged;
  return r;
}

struct SemiInfiniteReport {
  double extent = 0.0;
  double agents_per_unit = 0.0;
  std::vector<double> all_positions;        // every final cluster, left to right
  std::vector<double> certified_positions;  // leading clusters free of right-edge influence
  std::vector<double> certified_spacings;   // consecutive differences of certified_positions
  std::vector<std::int64_t> decoupling_times;  // per certified cluster: when its right gap opened
  bool converged = false;

  /// Spacings between certified clusters, excluding the one that forms at the left edge.
  [[nodiscard]] std::vector<double> interior_spacings() const {
    if (certified_spacings.size() <= 1) return {};
    return {certified_spacings.begin() + 1, certified_spacings.end()};
  }
};

/// Grid step just above 1/agents_per_unit on a 2^-40 lattice. Multiples of it
/// and their differences are exact doubles, so agents whose index differs by
/// agents_per_unit sit strictly more than 1 apart, as grid points exactly 1
/// apart do under the strict neighbor rule.
inline double lattice_step(double agents_per_unit) {
  return std::ceil(0x1p40 / agents_per_unit) * 0x1p-40;
}

/// Uniform agents on [0, extent] standing in for a half-line. A cluster is
/// certified only if its right gap opened before any influence from the
/// right end could arrive (influence travels at most 2 per step), and every
/// cluster to its left is certified too.
inline SemiInfiniteReport semi_infinite(double extent, double agents_per_unit, const SimParams& params) {
  if (!(extent >= 20.0)) throw std::invalid_argument("extent must be at least 20");
  if (!(agents_per_unit > 0.0)) throw std::invalid_argument("agents_per_unit must be positive");
  params.validate();
  const auto n = static_cast<std::size_t>(std::llround(extent * agents_per_unit)) + 1;
  std::vector<double> x0(n);
  const double h = lattice_step(agents_per_unit);
  for (std::size_t i = 0; i < n; ++i) x0[i] = static_cast<double>(i) * h;

  SemiInfiniteReport rep;
  rep.extent = extent;
  rep.agents_per_unit = agents_per_unit;

  std::vector<std::int64_t> gap_time(n - 1, -1);
  OpinionState cur(x0);
  for (std::int64_t k = 0;; ++k) {
    const auto x = cur.opinions();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (gap_time[i] < 0 && x[i + 1] - x[i] >= kConfidenceRadius) gap_time[i] = cur.time();
    }
    OpinionState next = step(cur);
    if (max_abs_change(cur.opinions(), next.opinions()) <= params.fixed_point_tol &&
        is_fixed_point(cur, params.fixed_point_tol)) {
      rep.converged = true;
      break;
    }
    if (k == params.max_steps) break;
    cur = std::move(next);
  }

  for (const auto& c : detect_clusters(cur)) {
    rep.all_positions.push_back(c.position);
    const std::size_t right = c.members.hi;
    const bool ok = right + 1 < n && gap_time[right] >= 0 &&
                    x0[right + 1] + 2.0 * static_cast<double>(gap_time[right]) + kConfidenceRadius < extent;
    if (!ok || rep.certified_positions.size() + 1 != rep.all_positions.size()) continue;
    rep.certified_positions.push_back(c.position);
    rep.decoupling_times.push_back(gap_time[right]);
  }
  for (std::size_t k = 1; k < rep.certified_positions.size(); ++k) {
    rep.certified_spacings.push_back(rep.certified_positions[k] - rep.certified_positions[k - 1]);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Presets

enum class PresetName { Fig4StableLt2, Fig5Conjecture, Metastable, SlowConvergence };

inline constexpr std::string_view kPresetNames[] = {"fig4_stable_lt2", "fig5_conjecture", "metastable",
                                                    "slow_convergence"};

inline std::string_view preset_name(PresetName p) { return kPresetNames[static_cast<int>(p)]; }

inline std::optional<PresetName> parse_preset(std::string_view s) {
  for (int k = 0; k < 4; ++k) {
    if (kPresetNames[k] == s) return static_cast<PresetName>(k);
  }
  return std::nullopt;
}

/// 251 opinions at spacing 0.01 on [0, 2.5] and 500 evenly spaced on (2.5, 3].
inline OpinionState fig4_initial_state() {
  std::vector<double> x;
  x.reserve(751);
  for (int i = 0; i <= 250; ++i) x.push_back(0.01 * i);
  for (int k = 1; k <= 500; ++k) x.push_back(2.5 + 0.5 * k / 500.0);
  return OpinionState(std::move(x));
}

/// Density `ratio` times higher on [2.5, 3) than on [0, 2.5).
inline DensitySpec two_level_density(double ratio = 10.0) {
  return DensitySpec({{0.0, 2.5, 1.0}, {2.5, 3.0, ratio}});
}

/// Height ratio of the random-draw study. At 501 agents it gives a lower
/// cluster holding about 30% of the agents, about 1.4-1.5 from the upper one.
inline constexpr double kConjectureDensityRatio = 4.3;

/// (n-1)/2 agents at 0.1, one at 1, (n-1)/2 at 1.9.
inline OpinionState slow_convergence_state(std::size_t n) {
  if (n % 2 == 0) throw std::invalid_argument("slow_convergence needs odd n");
  std::vector<double> x((n - 1) / 2, 0.1);
  x.push_back(1.0);
  x.insert(x.end(), (n - 1) / 2, 1.9);
  return OpinionState(std::move(x));
}

struct EquilibriumSummary {
  std::vector<Cluster> clusters;
  StabilityVerdict verdict;
  bool converged = false;
  std::int64_t convergence_time = -1;
  std::int64_t steps = 0;
};

inline EquilibriumSummary summarize_run(const SimRun& run) {
  EquilibriumSummary s;
  s.clusters = detect_clusters(run.result.final_state);
  Equilibrium eq;
  eq.clusters = s.clusters;
  s.verdict = classify(eq);
  s.converged = run.result.converged;
  if (run.result.converged) s.convergence_time = *run.result.convergence_time;
  s.steps = static_cast<std::int64_t>(run.trajectory.step_stats.size());
  return s;
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  EquilibriumSummary summary;
};

struct ConjectureStudy {
  std::vector<std::size_t> ns;
  std::vector<SeedOutcome> outcomes;  // ordered by (n, seed)
  std::vector<double> stable_fraction;  // per n
  std::vector<std::uint64_t> flipped_seeds;  // unstable at ns.front(), stable at ns.back()
};

/// Random draws from the two-level density, one run per (n, seed).
inline ConjectureStudy conjecture_study(const std::vector<std::size_t>& ns, std::uint64_t first_seed,
                                        std::size_t seeds, const SimParams& params,
                                        double ratio = kConjectureDensityRatio) {
  if (ns.empty() || seeds == 0) throw std::invalid_argument("conjecture_study needs ns and seeds");
  ConjectureStudy st;
  st.ns = ns;
  SimParams p = params;
  p.record_every = p.max_steps;
  const DensitySpec density = two_level_density(ratio);
  st.outcomes = parallel_map<SeedOutcome>(ns.size() * seeds, [&](std::size_t k) {
    SeedOutcome o;
    o.n = ns[k / seeds];
    o.seed = first_seed + k % seeds;
    SeededGenerator gen(o.seed);
    o.summary = summarize_run(simulate(sample(density, o.n, gen), p));
    return o;
  });
  for (std::size_t a = 0; a < ns.size(); ++a) {
    std::size_t stable = 0;
    for (std::size_t s = 0; s < seeds; ++s) stable += st.outcomes[a * seeds + s].summary.verdict.stable();
    st.stable_fraction.push_back(static_cast<double>(stable) / static_cast<double>(seeds));
  }
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto& lo = st.outcomes[s].summary.verdict;
    const auto& hi = st.outcomes[(ns.size() - 1) * seeds + s].summary.verdict;
    if (!lo.stable() && hi.stable()) st.flipped_seeds.push_back(first_seed + s);
  }
  return st;
}

struct MetastableReport {
  double L = 0.0;
  std::size_t n = 0;
  EquilibriumSummary summary;
  std::vector<MetastablePhase> phases;
  Trajectory trajectory;  // every step
};

/// Uniform agents on [0, L] with L just below the two-cluster threshold.
inline MetastableReport metastable_run(double L, double agents_per_unit, const SimParams& params,
                                       const MetastableOptions& opt = {}) {
  MetastableReport rep;
  rep.L = L;
  rep.n = static_cast<std::size_t>(std::llround(agents_per_unit * L));
  SimParams p = params;
  p.record_every = 1;
  const SimRun run = simulate(uniform_spacing(L, rep.n), p);
  rep.summary = summarize_run(run);
  rep.phases = metastable_scan(run.trajectory, opt);
  rep.trajectory = run.trajectory;
  return rep;
}

struct SlowConvergenceRow {
  std::size_t n = 0;
  std::int64_t convergence_time = -1;
  std::vector<Cluster> clusters;
};

inline std::vector<SlowConvergenceRow> slow_convergence_study(const std::vector<std::size_t>& ns,
                                                              const SimParams& params) {
  SimParams p = params;
  p.record_every = p.max_steps;
  std::vector<SlowConvergenceRow> rows;
  for (std::size_t n : ns) {
    const SimRun run = simulate(slow_convergence_state(n), p);
    SlowConvergenceRow r{n, run.result.converged ? *run.result.convergence_time : -1,
                         detect_clusters(run.result.final_state)};
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace hk
