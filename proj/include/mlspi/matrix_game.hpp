#pragma once

// Zero-sum 2x2 matrix games. Rows are attacker actions (maximizer), columns
// defender actions (minimizer).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "mlspi/errors.hpp"
#include "mlspi/state_space.hpp"

namespace mlspi {

using Matrix2x2 = std::array<std::array<double, 2>, 2>;

struct GameSolution {
  double value = 0.0;
  ActionDist defender_mix{1.0, 0.0};
  ActionDist attacker_mix{1.0, 0.0};
};

namespace detail {

inline void check_finite(const Matrix2x2& g) {
  for (const auto& row : g)
    for (double v : row)
      if (!std::isfinite(v)) throw DomainError("matrix game entry is not finite");
}

struct ColumnMix {
  double value;
  ActionDist mix;
};

// min over column mixes of max over rows. With beta0 the weight on column 0,
// row a pays g[a][1] + beta0 * s_a, s_a = g[a][0] - g[a][1]. The upper
// envelope is convex, so the minimum sits at an endpoint unless the two
// rows have strictly opposite slopes and cross inside (0, 1).
inline ColumnMix min_max_columns(const Matrix2x2& g) {
  const double pure0 = std::max(g[0][0], g[1][0]);
  const double pure1 = std::max(g[0][1], g[1][1]);

  const double s0 = g[0][0] - g[0][1];
  const double s1 = g[1][0] - g[1][1];
  if (s0 * s1 < 0.0) {
    const double beta0 = (g[1][1] - g[0][1]) / (s0 - s1);
    if (beta0 > 0.0 && beta0 < 1.0) {
      const double value = std::max(g[0][1] + beta0 * s0, g[1][1] + beta0 * s1);
      if (value < std::min(pure0, pure1)) return {value, {beta0, 1.0 - beta0}};
    }
  }
  // Lowest index wins ties.
  if (pure0 <= pure1) return {pure0, {1.0, 0.0}};
  return {pure1, {0.0, 1.0}};
}

// Row player's problem as the column problem of -g^T.
inline ColumnMix max_min_rows(const Matrix2x2& g) {
  const Matrix2x2 h{{{-g[0][0], -g[1][0]}, {-g[0][1], -g[1][1]}}};
  ColumnMix r = min_max_columns(h);
  r.value = -r.value;
  return r;
}

}  // namespace detail

/// Minimax value and an optimal defender mix (pure saddle column when one
/// exists, else the fully mixed equilibrium). `attacker_mix` is the
/// attacker's optimal mix for the same game.
inline GameSolution solve_defender(const Matrix2x2& g) {
  detail::check_finite(g);
  const auto col = detail::min_max_columns(g);
  const auto row = detail::max_min_rows(g);
  return {col.value, col.mix, row.mix};
}

/// Maximin value and an optimal attacker mix; `value` is the maximin
/// computation and agrees with solve_defender by the minimax theorem.
inline GameSolution solve_attacker(const Matrix2x2& g) {
  detail::check_finite(g);
  const auto col = detail::min_max_columns(g);
  const auto row = detail::max_min_rows(g);
  return {row.value, col.mix, row.mix};
}

/// Grid scan of min over beta0 in {0, step, ..., 1} of the row maximum.
/// Independent of the closed form above; used as a test oracle.
inline double brute_force_value(const Matrix2x2& g, double grid_step) {
  if (!(grid_step > 0.0 && grid_step <= 0.01))
    throw DomainError("brute_force_value: grid_step must lie in (0, 0.01]");
  detail::check_finite(g);
  const auto cells = static_cast<std::size_t>(std::ceil(1.0 / grid_step - 1e-9));
  double best = INFINITY;
  for (std::size_t i = 0; i <= cells; ++i) {
    const double beta0 = static_cast<double>(i) / static_cast<double>(cells);
    const double beta1 = 1.0 - beta0;
    const double worst = std::max(beta0 * g[0][0] + beta1 * g[0][1], beta0 * g[1][0] + beta1 * g[1][1]);
    best = std::min(best, worst);
  }
  return best;
}

}  // namespace mlspi
