#pragma once

// Parallel-queue security game: an attacker can redirect arrivals to the
// longest queue, a defender can secure the join-shortest-queue decision.
// The continuous-time process is embedded at its transition epochs; every
// function below describes that embedded discrete-time chain.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mlspi/errors.hpp"
#include "mlspi/random.hpp"

namespace mlspi {

/// Model constants. Rates are per unit time.
struct GameParams {
  int m = 2;            ///< number of servers
  int L = 1;            ///< buffer size per server
  double lambda = 1.0;  ///< Poisson arrival rate
  double mu = 1.0;      ///< per-server service rate
  double c_a = 0.0;     ///< attack cost rate
  double c_b = 0.0;     ///< defense cost rate
  double gamma = 0.5;   ///< discount factor of the embedded chain

  /// Number of feature functions, m + 2.
  int feature_dim() const noexcept { return m + 2; }

  /// Largest instantaneous reward rate, mL + c_b.
  double rho_max() const noexcept { return m * L + c_b; }

  /// Bound on |q| for any policy pair, (mL + c_b) / (lambda (1 - gamma)).
  double q_max() const noexcept { return rho_max() / (lambda * (1.0 - gamma)); }

  /// lambda < m mu. Not enforced; callers may warn.
  bool is_stable() const noexcept { return lambda < m * mu; }

  void validate() const {
    if (m < 2) throw DomainError("GameParams: m must be >= 2");
    if (L < 1) throw DomainError("GameParams: L must be >= 1");
    if (!(lambda > 0.0)) throw DomainError("GameParams: lambda must be > 0");
    if (!(mu > 0.0)) throw DomainError("GameParams: mu must be > 0");
    if (!(c_a >= 0.0)) throw DomainError("GameParams: c_a must be >= 0");
    if (!(c_b >= 0.0)) throw DomainError("GameParams: c_b must be >= 0");
    if (!(gamma >= 0.0 && gamma < 1.0))
      throw DomainError("GameParams: gamma must lie in [0, 1)");
  }

  bool operator==(const GameParams&) const = default;
};

/// Queue occupancies, one entry per server.
class State {
 public:
  State() = default;
  explicit State(std::vector<int> q) : q_(std::move(q)) {}
  State(std::initializer_list<int> q) : q_(q) {}

  int size() const noexcept { return static_cast<int>(q_.size()); }
  int operator[](int i) const { return q_[static_cast<std::size_t>(i)]; }
  int& operator[](int i) { return q_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& values() const noexcept { return q_; }

  int one_norm() const noexcept { return std::accumulate(q_.begin(), q_.end(), 0); }

  auto operator<=>(const State&) const = default;

 private:
  std::vector<int> q_;
};

inline std::string to_string(const State& x) {
  std::string out;
  for (int i = 0; i < x.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(x[i]);
  }
  return out;
}

inline void validate_state(const State& x, const GameParams& params) {
  if (x.size() != params.m)
    throw DomainError("state has " + std::to_string(x.size()) + " components, expected " +
                      std::to_string(params.m));
  for (int i = 0; i < x.size(); ++i)
    if (x[i] < 0 || x[i] > params.L)
      throw DomainError("state component " + std::to_string(i) + " = " + std::to_string(x[i]) +
                        " outside [0, " + std::to_string(params.L) + "]");
}

inline void validate_action(int action) {
  if (action != 0 && action != 1) throw DomainError("action must be 0 or 1");
}

/// Attacker's reward rate (defender's cost rate): |x|_1 - c_a a + c_b b.
inline double instantaneous_reward(const State& x, int a, int b, const GameParams& params) {
  validate_state(x, params);
  validate_action(a);
  validate_action(b);
  return x.one_norm() - params.c_a * a + params.c_b * b;
}

/// Number of busy servers.
inline int active_servers(const State& x) noexcept {
  const auto& q = x.values();
  return static_cast<int>(std::count_if(q.begin(), q.end(), [](int v) { return v > 0; }));
}

/// Total event rate lambda + k(x) mu.
inline double event_rate(const State& x, const GameParams& params) noexcept {
  return params.lambda + active_servers(x) * params.mu;
}

/// Mean sojourn time in x, 1 / (lambda + k(x) mu).
inline double expected_sojourn(const State& x, const GameParams& params) noexcept {
  return 1.0 / event_rate(x, params);
}

/// One-step reward of the embedded chain when leaving x under (a, b).
inline double expected_reward(const State& x, int a, int b, const GameParams& params) {
  return instantaneous_reward(x, a, b, params) * expected_sojourn(x, params);
}

/// Where an arriving job would go. Server indices are zero-based.
struct RouteTarget {
  bool rejected = false;
  std::vector<int> servers;  ///< tied candidate servers, ascending

  bool operator==(const RouteTarget&) const = default;
};

/// An undefended attack sends the job to the longest queue; every other
/// action pair restores join-shortest-queue. A full target rejects the job.
inline RouteTarget route_target(const State& x, int a, int b, const GameParams& params) {
  validate_state(x, params);
  validate_action(a);
  validate_action(b);
  const auto& q = x.values();
  const bool attacked = (a == 1 && b == 0);
  const int target = attacked ? *std::max_element(q.begin(), q.end())
                              : *std::min_element(q.begin(), q.end());
  RouteTarget out;
  for (int i = 0; i < x.size(); ++i)
    if (x[i] == target) out.servers.push_back(i);
  out.rejected = (target == params.L);
  return out;
}

struct Outcome {
  State next;
  double probability = 0.0;
};

/// Successor distribution of the embedded chain, sorted by next state.
struct TransitionDistribution {
  std::vector<Outcome> outcomes;

  double probability_of(const State& next) const {
    for (const auto& o : outcomes)
      if (o.next == next) return o.probability;
    return 0.0;
  }
};

/// Competing exponentials: an arrival with probability lambda / Lambda,
/// split uniformly over the routing tie set (self-loop on rejection), and a
/// departure from each busy server with probability mu / Lambda.
inline TransitionDistribution transition_distribution(const State& x, int a, int b,
                                                      const GameParams& params) {
  const RouteTarget route = route_target(x, a, b, params);
  const double total = event_rate(x, params);

  std::map<State, double> merged;
  const double p_arrival = params.lambda / total;
  if (route.rejected) {
    merged[x] += p_arrival;
  } else {
    const double share = p_arrival / static_cast<double>(route.servers.size());
    for (int i : route.servers) {
      State next = x;
      ++next[i];
      merged[next] += share;
    }
  }
  const double p_departure = params.mu / total;
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] == 0) continue;
    State next = x;
    --next[i];
    merged[next] += p_departure;
  }

  TransitionDistribution dist;
  dist.outcomes.reserve(merged.size());
  for (auto& [next, p] : merged) dist.outcomes.push_back({next, p});
  return dist;
}

struct Transition {
  State next;
  double dt = 0.0;
};

/// Draws the next state from transition_distribution and the sojourn from
/// an exponential with rate lambda + k(x) mu.
inline Transition sample_transition(const State& x, int a, int b, const GameParams& params,
                                    CounterRng& rng) {
  const TransitionDistribution dist = transition_distribution(x, a, b, params);
  const double u = rng.uniform();
  double cumulative = 0.0;
  const State* chosen = &dist.outcomes.back().next;
  for (const auto& o : dist.outcomes) {
    cumulative += o.probability;
    if (u < cumulative) {
      chosen = &o.next;
      break;
    }
  }
  return {*chosen, rng.exponential(event_rate(x, params))};
}

}  // namespace mlspi
