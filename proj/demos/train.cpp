// Trains a linear defender against a best-responding attacker and compares
// it with the exact equilibrium on the same game.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "mlspi/mlspi.hpp"

int main(int argc, char** argv) {
  mlspi::TrainConfig cfg;
  cfg.params = {2, 3, 1.5, 1.0, 0.5, 0.3, 0.9};
  cfg.n = 2000;
  cfg.max_outer_iters = 15;
  cfg.attacker = mlspi::BestResponderAttacker{};
  cfg.seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;

  const mlspi::TrainReport report = mlspi::train(cfg);
  for (std::size_t k = 0; k < report.diagnostics.size(); ++k) {
    const auto& d = report.diagnostics[k];
    std::printf("iter %2zu  td_error %.4f  theta_change %.4g  eps %.3f\n", d.iteration, d.td_error, d.theta_change,
                d.epsilon);
  }
  std::printf("%s\n", report.converged ? "converged" : "hit the iteration limit");

  const mlspi::TabularGame game(cfg.params);
  const mlspi::ShapleyResult mpe = mlspi::shapley_value_iteration(game);
  const double gap = mlspi::exploitability_gap(*report.beta_final, game, mpe.v);
  double v_sup = 0.0;
  for (double v : mpe.v) v_sup = std::max(v_sup, std::abs(v));
  std::printf("exploitability %.4f (sup v* = %.4f)\n", gap, v_sup);
  return 0;
}
