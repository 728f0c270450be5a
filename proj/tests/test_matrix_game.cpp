#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mlspi/mlspi.hpp"
#include "oracles.hpp"

using namespace mlspi;

namespace {

double worst_row(const Matrix2x2& g, const ActionDist& beta) {
  return std::max(beta[0] * g[0][0] + beta[1] * g[0][1], beta[0] * g[1][0] + beta[1] * g[1][1]);
}

double worst_column(const Matrix2x2& g, const ActionDist& alpha) {
  return std::min(alpha[0] * g[0][0] + alpha[1] * g[1][0], alpha[0] * g[0][1] + alpha[1] * g[1][1]);
}

double spread(const Matrix2x2& g) {
  const double lo = std::min({g[0][0], g[0][1], g[1][0], g[1][1]});
  const double hi = std::max({g[0][0], g[0][1], g[1][0], g[1][1]});
  return hi - lo;
}

Matrix2x2 random_matrix(CounterRng& rng) {
  Matrix2x2 g;
  for (auto& row : g)
    for (auto& v : row) v = -10.0 + 20.0 * rng.uniform();
  return g;
}

}  // namespace

TEST(SolveDefender, SaddlePoint) {
  const Matrix2x2 g{{{1, 2}, {0, 3}}};
  const GameSolution s = solve_defender(g);
  EXPECT_DOUBLE_EQ(s.value, 1.0);
  EXPECT_EQ(s.defender_mix, (ActionDist{1.0, 0.0}));
}

TEST(SolveDefender, MixedEquilibrium) {
  const GameSolution s = solve_defender({{{0, 2}, {3, 1}}});
  EXPECT_NEAR(s.value, 1.5, 1e-12);
  EXPECT_NEAR(s.defender_mix[0], 0.25, 1e-12);
  EXPECT_NEAR(s.defender_mix[1], 0.75, 1e-12);
}

TEST(SolveDefender, MatchingPennies) {
  const GameSolution s = solve_defender({{{1, 0}, {0, 1}}});
  EXPECT_NEAR(s.value, 0.5, 1e-12);
  EXPECT_NEAR(s.defender_mix[0], 0.5, 1e-12);
}

TEST(SolveDefender, RejectsNonFinite) {
  EXPECT_THROW(solve_defender({{{std::nan(""), 0}, {0, 1}}}), DomainError);
  EXPECT_THROW(solve_attacker({{{INFINITY, 0}, {0, 1}}}), DomainError);
}

TEST(SolveDefender, ZeroMatrixPicksLowestAction) {
  const GameSolution s = solve_defender({{{0, 0}, {0, 0}}});
  EXPECT_EQ(s.defender_mix, (ActionDist{1.0, 0.0}));
  EXPECT_EQ(s.attacker_mix, (ActionDist{1.0, 0.0}));
}

TEST(SolveAttacker, Examples) {
  const GameSolution saddle = solve_attacker({{{1, 2}, {0, 3}}});
  EXPECT_DOUBLE_EQ(saddle.value, 1.0);
  EXPECT_EQ(saddle.attacker_mix, (ActionDist{1.0, 0.0}));

  const GameSolution mixed = solve_attacker({{{0, 2}, {3, 1}}});
  EXPECT_NEAR(mixed.value, 1.5, 1e-12);
  EXPECT_NEAR(mixed.attacker_mix[0], 0.5, 1e-12);

  const GameSolution rows = solve_attacker({{{4, -1}, {4, -1}}});
  EXPECT_NEAR(rows.value, -1.0, 1e-12);
}

TEST(BruteForceValue, Examples) {
  EXPECT_NEAR(brute_force_value({{{0, 2}, {3, 1}}}, 1e-3), 1.5, 2e-3);
  EXPECT_DOUBLE_EQ(brute_force_value({{{7, 7}, {7, 7}}}, 1e-3), 7.0);
  EXPECT_DOUBLE_EQ(brute_force_value({{{1, 2}, {0, 3}}}, 1e-3), 1.0);
  EXPECT_THROW(brute_force_value({{{1, 2}, {0, 3}}}, 0.5), DomainError);
  EXPECT_THROW(brute_force_value({{{1, 2}, {0, 3}}}, 0.0), DomainError);
}

TEST(MatrixGame, RandomMatricesAgreeWithOracles) {
  CounterRng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix2x2 g = random_matrix(rng);
    const GameSolution d = solve_defender(g);
    const GameSolution a = solve_attacker(g);
    EXPECT_NEAR(d.value, a.value, 1e-10);
    EXPECT_NEAR(worst_row(g, d.defender_mix), d.value, 1e-10);
    EXPECT_NEAR(worst_column(g, a.attacker_mix), a.value, 1e-10);
    EXPECT_LE(std::abs(d.value - brute_force_value(g, 1e-3)), 5e-3 * spread(g));
    EXPECT_NEAR(oracle::maximin_grid(g, 20000), d.value, 1e-3 * spread(g));
    for (const auto& mix : {d.defender_mix, d.attacker_mix}) {
      EXPECT_GE(mix[0], 0.0);
      EXPECT_GE(mix[1], 0.0);
      EXPECT_NEAR(mix[0] + mix[1], 1.0, 1e-12);
    }
    const double lo = std::min({g[0][0], g[0][1], g[1][0], g[1][1]});
    EXPECT_GE(d.value, lo - 1e-12);
    EXPECT_LE(d.value, lo + spread(g) + 1e-12);
  }
}

TEST(MatrixGame, ShiftAndMonotonicity) {
  CounterRng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const Matrix2x2 g = random_matrix(rng);
    const double c = -5.0 + 10.0 * rng.uniform();
    Matrix2x2 shifted = g;
    for (auto& row : shifted)
      for (auto& v : row) v += c;
    const GameSolution base = solve_defender(g);
    EXPECT_NEAR(solve_defender(shifted).value, base.value + c, 1e-9);

    Matrix2x2 raised = g;
    raised[rng.uniform_int(2)][rng.uniform_int(2)] += 3.0 * rng.uniform();
    EXPECT_GE(solve_defender(raised).value, base.value - 1e-12);
  }
}
