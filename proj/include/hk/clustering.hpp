#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hk/dynamics.hpp"
#include "hk/state.hpp"

namespace hk {

inline constexpr double kDefaultGapThreshold = 0.5;

struct Cluster {
  double position = 0.0;  // weighted mean opinion of the members
  double weight = 0.0;
  IndexRange members;
};

struct Equilibrium {
  std::vector<Cluster> clusters;
  bool converged = true;
  std::optional<std::int64_t> convergence_time;
  double tol = 0.0;

  [[nodiscard]] double total_weight() const {
    double s = 0.0;
    for (const auto& c : clusters) s += c.weight;
    return s;
  }
};

/// Splits at every consecutive gap larger than gap_threshold.
inline std::vector<Cluster> detect_clusters(const OpinionState& state, double gap_threshold = kDefaultGapThreshold) {
  if (!(gap_threshold > 0.0 && gap_threshold < 1.0)) {
    throw std::invalid_argument("gap_threshold must lie in (0, 1)");
  }
  const auto x = state.opinions();
  const auto w = state.weights();
  std::vector<Cluster> out;
  std::size_t start = 0;
  auto close = [&](std::size_t end) {
    double mass = 0.0;
    double moment = 0.0;
    for (std::size_t k = start; k <= end; ++k) {
      mass += w[k];
      moment += w[k] * x[k];
    }
    out.push_back({std::clamp(moment / mass, x[start], x[end]), mass, {start, end}});
  };
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] - x[i - 1] > gap_threshold) {
      close(i - 1);
      start = i;
    }
  }
  close(x.size() - 1);
  return out;
}

/// Groups separated by gaps >= 1; each evolves independently from now on.
inline std::vector<IndexRange> decoupled_groups(const OpinionState& state) {
  return interaction_components(state.opinions());
}

/// Wraps a fixed point into an Equilibrium. Throws if the state is not one.
inline Equilibrium certify_equilibrium(const OpinionState& state, double tol,
                                       double gap_threshold = kDefaultGapThreshold) {
  if (!is_fixed_point(state, tol)) throw std::invalid_argument("state is not a fixed point");
  Equilibrium eq;
  eq.clusters = detect_clusters(state, gap_threshold);
  eq.tol = tol;
  return eq;
}

inline Equilibrium certify_equilibrium(const SimResult& result, double tol) {
  Equilibrium eq = certify_equilibrium(result.final_state, tol);
  eq.converged = result.converged;
  eq.convergence_time = result.convergence_time;
  return eq;
}

/// Builds an equilibrium directly from cluster positions and weights
/// (one synthetic agent per cluster).
inline Equilibrium make_equilibrium(const std::vector<double>& positions, const std::vector<double>& weights) {
  const OpinionState s(positions, weights);
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s.opinion(i) - s.opinion(i - 1) >= kConfidenceRadius)) {
      throw std::invalid_argument("clusters must be at least 1 apart");
    }
  }
  Equilibrium eq;
  for (std::size_t i = 0; i < s.size(); ++i) eq.clusters.push_back({s.opinion(i), s.weight(i), {i, i}});
  eq.convergence_time = 0;
  return eq;
}

/// One agent per cluster, weight = cluster weight.
inline OpinionState cluster_state(const Equilibrium& eq) {
  std::vector<double> x;
  std::vector<double> w;
  for (const auto& c : eq.clusters) {
    x.push_back(c.position);
    w.push_back(c.weight);
  }
  return OpinionState(std::move(x), std::move(w));
}

/// First recorded step whose state was a certified fixed point.
inline std::optional<std::int64_t> convergence_time(const Trajectory& traj) {
  if (traj.step_stats.empty()) return std::nullopt;
  const std::int64_t t0 = traj.step_stats.front().time;
  for (const auto& s : traj.step_stats) {
    if (s.structurally_fixed && s.max_change <= traj.fixed_point_tol) return s.time - t0;
  }
  return std::nullopt;
}

}  // namespace hk
