// Solves a small routing game exactly and prints the defender's
// equilibrium mix next to the state values.

#include <cstdio>

#include "mlspi/mlspi.hpp"

int main() {
  const mlspi::GameParams params{2, 3, 1.5, 1.0, 0.5, 0.3, 0.9};
  const mlspi::ShapleyResult r = mlspi::shapley_value_iteration(params);
  std::printf("converged in %zu iterations\n", r.iterations);
  std::printf("%-8s %10s %10s %10s\n", "state", "v*", "P(defend)", "P(attack)");
  for (std::size_t s = 0; s < r.q.space().size(); ++s) {
    const mlspi::State x = r.q.space().state(s);
    std::printf("%-8s %10.4f %10.4f %10.4f\n", mlspi::to_string(x).c_str(), r.v[s], r.beta.at(s)[1],
                r.alpha.at(s)[1]);
  }
  return 0;
}
