#include <gtest/gtest.h>

#include <numeric>

#include "hk/clustering.hpp"
#include "hk/continuum.hpp"
#include "hk/density.hpp"
#include "hk/stability.hpp"
#include "oracle.hpp"

using namespace hk;

namespace {

// Agents carry measure: total weight 1.
OpinionState normalized(const OpinionState& s) {
  std::vector<double> w(s.weights().begin(), s.weights().end());
  const double total = s.total_weight();
  for (auto& v : w) v /= total;
  return OpinionState(gen::copy(s.opinions()), std::move(w));
}

OpinionState random_measure(SeededGenerator& g, std::size_t max_n) { return normalized(gen::state(g, max_n)); }

}  // namespace

TEST(Degree, Examples) {
  const OpinionState close({0.0, 0.3, 0.9}, {0.2, 0.3, 0.5});
  for (double d : degree(close)) EXPECT_DOUBLE_EQ(d, 1.0);

  const OpinionState apart({0.0, 1.5}, {0.5, 0.5});
  EXPECT_EQ(degree(apart), (std::vector<double>{0.5, 0.5}));

  const OpinionState chain({0.0, 0.9, 1.8}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  const auto d = degree(chain);
  EXPECT_DOUBLE_EQ(d[0], 2.0 / 3);
  EXPECT_DOUBLE_EQ(d[1], 1.0);
  EXPECT_DOUBLE_EQ(d[2], 2.0 / 3);
}

TEST(Adjacency, OnesGiveDegreeAndIsolatedAgentsSeeThemselves) {
  SeededGenerator g(31);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = random_measure(g, 200);
    const auto a = adjacency_apply(s, std::vector<double>(s.size(), 1.0));
    const auto d = degree(s);
    for (std::size_t i = 0; i < s.size(); ++i) ASSERT_DOUBLE_EQ(a[i], d[i]);
  }
  const OpinionState spread({0.0, 2.0, 5.0}, {0.2, 0.3, 0.5});
  EXPECT_EQ(adjacency_apply(spread, std::vector<double>{1.0, -2.0, 4.0}), (std::vector<double>{0.2, -0.6, 2.0}));
  EXPECT_THROW(adjacency_apply(spread, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Adjacency, MatchesPairScan) {
  SeededGenerator g(32);
  for (int rep = 0; rep < 200; ++rep) {
    const auto s = random_measure(g, 200);
    const auto y = gen::vec(g, s.size(), 3.0);
    const auto x = gen::copy(s.opinions());
    const auto w = gen::copy(s.weights());
    const auto got = adjacency_apply(s, y);
    const auto want = oracle::adjacency(x, w, y);
    for (std::size_t i = 0; i < s.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-13);
  }
}

TEST(Operators, SymmetricAndPositiveSemidefinite) {
  SeededGenerator g(33);
  for (int rep = 0; rep < 200; ++rep) {
    const auto s = random_measure(g, 200);
    const auto y = gen::vec(g, s.size());
    const auto z = gen::vec(g, s.size());
    const auto x = gen::copy(s.opinions());
    const auto w = gen::copy(s.weights());

    const double lhs = inner(s, z, adjacency_apply(s, y));
    const double rhs = inner(s, adjacency_apply(s, z), y);
    ASSERT_LE(std::abs(lhs - rhs), 1e-12 * oracle::norm(w, y) * oracle::norm(w, z));

    const double q = psd_check(s, y);
    ASSERT_GE(q, -1e-12);
    ASSERT_NEAR(q, oracle::quad_form(x, w, y, -1), 1e-12);
    ASSERT_NEAR(window_quadratic_form(s, y, -1), oracle::quad_form(x, w, y, -1), 1e-12);
    ASSERT_NEAR(window_quadratic_form(s, y, +1), oracle::quad_form(x, w, y, +1), 1e-12);
  }
}

TEST(Operators, ConstantsAreInTheKernel) {
  const auto s = discretize(DensitySpec::uniform(0.0, 4.0), 400);
  EXPECT_NEAR(psd_check(s, std::vector<double>(s.size(), 2.5)), 0.0, 1e-13);
  EXPECT_THROW((void)window_quadratic_form(s, std::vector<double>(s.size(), 1.0), 0), std::invalid_argument);
}

TEST(LaplacianResidual, VanishesOnFixedPoints) {
  const OpinionState fixed({0.0, 0.0, 1.5, 3.0}, {0.25, 0.25, 0.25, 0.25});
  const auto r = laplacian_residual(fixed);
  for (double v : r.residual) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.identity_error, 0.0);
}

TEST(LaplacianResidual, ThreeAgentExample) {
  const OpinionState s({0.0, 0.5, 1.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  const auto r = laplacian_residual(s);
  EXPECT_NEAR(r.residual[0], -1.0 / 6, 1e-15);
  EXPECT_NEAR(r.residual[1], 0.0, 1e-15);
  EXPECT_NEAR(r.residual[2], 1.0 / 6, 1e-15);
}

TEST(LaplacianResidual, ShiftInvariant) {
  SeededGenerator g(34);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = random_measure(g, 100);
    std::vector<double> x = gen::copy(s.opinions());
    for (auto& v : x) v += 0.5;  // exact on the quarter grid
    const OpinionState t(x, gen::copy(s.weights()));
    const auto a = laplacian_residual(s).residual;
    const auto b = laplacian_residual(t).residual;
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(DynamicsIdentity, HoldsOnRandomStates) {
  SeededGenerator g(35);
  for (int rep = 0; rep < 300; ++rep) {
    const auto s = random_measure(g, 300);
    ASSERT_LE(laplacian_residual(s).identity_error, 1e-12);
  }
}

TEST(Potential, Examples) {
  EXPECT_EQ(potential(OpinionState({2.0, 2.0}, {0.5, 0.5})), 0.0);
  EXPECT_DOUBLE_EQ(potential(OpinionState({0.0, 1.0}, {0.5, 0.5})), 0.25);
  EXPECT_DOUBLE_EQ(potential(OpinionState({0.0, 3.0}, {0.5, 0.5})), 0.25);
  EXPECT_DOUBLE_EQ(potential(OpinionState({0.0, 0.5}, {0.5, 0.5})), 1.0 / 16);
}

TEST(Potential, MatchesPairScanAndTightIdentity) {
  SeededGenerator g(36);
  for (int rep = 0; rep < 200; ++rep) {
    const auto s = random_measure(g, 200);
    const auto x = gen::copy(s.opinions());
    const auto w = gen::copy(s.weights());
    const double v = potential(s);
    const double want = oracle::potential(x, w);
    ASSERT_NEAR(v, want, 1e-12 * std::max(want, 1e-300));
    ASSERT_NEAR(non_neighbor_pair_mass(s), oracle::non_neighbor_mass(x, w), 1e-13);

    const double split = psd_check(s, x) + 0.5 * non_neighbor_pair_mass(s);
    ASSERT_NEAR(split, v, 1e-12 * std::max(v, 1e-300)) << "n=" << s.size();
  }
}

TEST(Lyapunov, FixedPointHasZeroDecrement) {
  const auto c = lyapunov_decrement(OpinionState({0.0, 1.0, 2.5}, {0.2, 0.3, 0.5}));
  EXPECT_EQ(c.dV, 0.0);
  EXPECT_EQ(c.bound, 0.0);
  EXPECT_TRUE(c.holds);
}

TEST(Lyapunov, DecrementBoundAlongRandomTrajectories) {
  SeededGenerator g(37);
  for (int rep = 0; rep < 100; ++rep) {
    OpinionState s = random_measure(g, 200);
    const double v0 = potential(s);
    double chain = 0.0;
    for (int t = 0; t < 50; ++t) {
      const auto c = lyapunov_decrement(s);
      ASSERT_TRUE(c.holds) << "rep " << rep << " t " << t << " dV " << c.dV << " bound " << c.bound;
      ASSERT_LE(c.bound, 0.0);
      chain -= c.bound;
      ASSERT_LE(chain, v0 + 1e-9);
      s = step(s);
    }
  }
}

TEST(Regularity, UniformProfile) {
  const auto s = discretize(DensitySpec::uniform(0.0, 10.0), 1000);
  const auto r = regularity_bounds(s, 1.0);
  EXPECT_NEAR(r.m_hat, 0.1, 2.0 / 1000);
  EXPECT_NEAR(r.M_hat, 0.1, 2.0 / 1000);
  EXPECT_TRUE(r.regular());
  EXPECT_THROW((void)regularity_bounds(s, 0.0), std::invalid_argument);
  EXPECT_THROW((void)regularity_bounds(s, 20.0), std::invalid_argument);
}

// Wide profiles keep bounded density after a step and the bounds do not
// depend on n; a profile narrower than 2 collapses its middle onto one value.
TEST(Regularity, PreservedForWideProfilesOnly) {
  std::vector<double> upper;
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    const auto s = step(discretize(DensitySpec::uniform(0.0, 6.0), n));
    const auto r = regularity_bounds(s, 0.5);
    EXPECT_GT(r.m_hat, 0.1);
    upper.push_back(r.M_hat);
  }
  EXPECT_NEAR(upper[0], upper[2], 0.02);
  EXPECT_NEAR(upper[1], upper[2], 0.02);

  for (std::size_t n : {1000u, 10000u, 100000u}) {
    const auto s = step(discretize(DensitySpec::uniform(0.0, 1.8), n));
    const double mid = s.opinion(n / 2);
    const auto x = s.opinions();
    const auto same = std::count(x.begin(), x.end(), mid);
    EXPECT_GE(static_cast<double>(same) / static_cast<double>(n), 0.1);
    EXPECT_GE(regularity_bounds(s, 1e-3).M_hat, 100.0);
  }
}

TEST(DistanceToF, Examples) {
  EXPECT_EQ(distance_to_F(OpinionState({0.0, 1.5}, {0.5, 0.5})).epsilon_star, 0.0);
  const auto r = distance_to_F(OpinionState({0.0, 0.5}, {0.5, 0.5}));
  EXPECT_EQ(r.epsilon_star, 0.5);
  ASSERT_EQ(r.witness.size(), 1u);
  EXPECT_EQ(r.witness[0].mass, 1.0);
}

TEST(DistanceToF, WitnessCentersSeparated) {
  SeededGenerator g(38);
  for (int rep = 0; rep < 300; ++rep) {
    const auto s = random_measure(g, 300);
    const auto r = distance_to_F(s);
    ASSERT_FALSE(r.witness.empty());
    double mass = 0.0;
    for (std::size_t k = 0; k < r.witness.size(); ++k) {
      if (k > 0) {
        ASSERT_GE(r.witness[k].value - r.witness[k - 1].value, 1.0);
      }
      mass += r.witness[k].mass;
    }
    ASSERT_NEAR(mass, 1.0, 1e-12);
    ASSERT_GE(r.epsilon_star, 0.0);
    ASSERT_LE(r.epsilon_star, 1.0 + 1e-12);
  }
}

TEST(DistanceToF, ReachesZeroAlongTrajectory) {
  OpinionState s = discretize(DensitySpec::uniform(0.0, 6.0), 1000);
  EXPECT_GT(distance_to_F(s).epsilon_star, 0.1);
  SimParams p;
  p.record_every = p.max_steps;
  const auto run = simulate(s, p);
  ASSERT_TRUE(run.result.converged);
  EXPECT_LE(distance_to_F(run.result.final_state).epsilon_star, 1e-9);
}

TEST(UpdatedOpinion, MatchesStepAndIsMonotone) {
  SeededGenerator g(39);
  for (int rep = 0; rep < 100; ++rep) {
    const auto s = random_measure(g, 100);
    const auto next = step(s);
    for (std::size_t i = 0; i < s.size(); ++i) ASSERT_NEAR(updated_opinion(s, s.opinion(i)), next.opinion(i), 1e-12);

    std::vector<double> probes(64);
    for (auto& a : probes) a = g.uniform(s.min_opinion() - 2.0, s.max_opinion() + 2.0);
    std::sort(probes.begin(), probes.end());
    for (std::size_t k = 1; k < probes.size(); ++k) {
      ASSERT_GE(updated_opinion(s, probes[k]), updated_opinion(s, probes[k - 1]) - 1e-12);
    }
  }
  EXPECT_EQ(updated_opinion(OpinionState({0.0}), 5.0), 5.0);
}

TEST(ContinuityProbe, ZeroDeltaAndBound) {
  const auto s = discretize(DensitySpec::uniform(0.0, 6.0), 6000);
  EXPECT_EQ(continuity_probe(s, 0.0, 4, 1, 0.5).max_response, 0.0);
  const auto r = continuity_probe(s, 1e-4, 16, 2, 0.5);
  EXPECT_LE(r.max_response, r.bound);
  EXPECT_THROW((void)continuity_probe(s, -1.0, 4, 1, 0.5), std::invalid_argument);
  EXPECT_THROW((void)continuity_probe(s, 1e-3, 0, 1, 0.5), std::invalid_argument);
}

TEST(ContinuityProbe, ResponseShrinksWithDelta) {
  const auto s = discretize(DensitySpec::uniform(0.0, 6.0), 60000);
  double prev = std::numeric_limits<double>::infinity();
  for (double delta : {1e-2, 1e-3, 1e-4}) {
    const auto probe = continuity_probe(s, delta, 8, 3, 0.5);
    EXPECT_LT(probe.max_response, prev) << delta;
    EXPECT_LE(probe.max_response, probe.bound) << delta;
    prev = probe.max_response;
  }
}

TEST(CellwiseSupDistance, Examples) {
  EXPECT_EQ(cellwise_sup_distance(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 1.0, 2.0, 2.0}), 0.0);
  EXPECT_EQ(cellwise_sup_distance(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 1.5, 2.0}), 0.5);
  EXPECT_EQ(cellwise_sup_distance(std::vector<double>{0.0, 3.0, 6.0}, std::vector<double>{0.0, 3.0}), 3.0);
}

TEST(RefineCompare, HorizonZeroIsQuantileDiscrepancy) {
  const auto r = refine_compare(DensitySpec::uniform(0.0, 6.0), {100, 1000, 10000}, 0);
  ASSERT_TRUE(r.applicable);
  ASSERT_EQ(r.errors.size(), 3u);
  for (std::size_t k = 0; k + 1 < r.ns.size(); ++k) {
    const double half_cell = 6.0 / (2.0 * static_cast<double>(r.ns[k]));
    EXPECT_NEAR(r.errors[k], half_cell, 6.0 / 10000 + 1e-12);
  }
  EXPECT_EQ(r.errors.back(), 0.0);
}

TEST(RefineCompare, ShortHorizonErrorsDecrease) {
  const auto r = refine_compare(DensitySpec::uniform(0.0, 6.0), {100, 1000, 10000}, 3);
  ASSERT_TRUE(r.applicable);
  EXPECT_GT(r.errors[0], r.errors[1]);
  EXPECT_GT(r.errors[1], r.errors[2]);
}

TEST(RefineCompare, NarrowProfileNotApplicable) {
  const auto r = refine_compare(DensitySpec::uniform(0.0, 1.5), {100, 1000}, 5);
  EXPECT_FALSE(r.applicable);
  EXPECT_THROW((void)refine_compare(DensitySpec::uniform(0.0, 6.0), {1000, 100}, 5), std::invalid_argument);
  EXPECT_THROW((void)refine_compare(DensitySpec::uniform(0.0, 6.0), {}, 5), std::invalid_argument);
}

// Uniform profiles of width 5.2, 5.75, 6.7 and 9.7 settle, at both 1000 and
// 4000 agents per unit, into clusters that violate the pair condition (e.g.
// width 5.2: two equal halves 1.987 apart). Kept disabled until the
// discretized statement is reformulated.
TEST(FixedPointsOfWideProfiles, DISABLED_SatisfyPairCondition) {
  SimParams p;
  p.record_every = p.max_steps;
  for (int k = 0; k <= 60; ++k) {
    const double L = 3.0 + 0.1 * k;
    const auto s = discretize(DensitySpec::uniform(0.0, L), static_cast<std::size_t>(std::llround(1000 * L)));
    const auto run = simulate(s, p);
    ASSERT_TRUE(run.result.converged);
    Equilibrium eq;
    eq.clusters = detect_clusters(run.result.final_state);
    EXPECT_EQ(classify(eq).status, StabilityStatus::Stable) << "L=" << L;
  }
}
