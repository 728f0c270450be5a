#pragma once

// Minimax least-squares policy iteration for the defender: collect a fresh
// epsilon-greedy trajectory under the current mix, evaluate it by fitted-Q
// iteration, improve by solving the per-state 2x2 game on q-hat, repeat
// until the weights settle.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mlspi/errors.hpp"
#include "mlspi/evaluation.hpp"
#include "mlspi/exact_solver.hpp"
#include "mlspi/features.hpp"
#include "mlspi/game_model.hpp"
#include "mlspi/matrix_game.hpp"
#include "mlspi/random.hpp"
#include "mlspi/state_space.hpp"

namespace mlspi {

/// epsilon_t = max(eps_min, eps0 * eps_decay^t).
struct ExplorationSchedule {
  double eps0 = 1.0;
  double eps_min = 0.05;
  double eps_decay = 0.999;

  double at(std::size_t t) const { return std::max(eps_min, eps0 * std::pow(eps_decay, static_cast<double>(t))); }

  void validate() const {
    if (!(0.0 <= eps_min && eps_min <= eps0 && eps0 <= 1.0))
      throw DomainError("exploration: need 0 <= eps_min <= eps0 <= 1");
    if (!(eps_decay > 0.0 && eps_decay <= 1.0)) throw DomainError("exploration: need 0 < eps_decay <= 1");
  }

  static ExplorationSchedule constant(double eps) { return {eps, eps, 1.0}; }
};

/// With probability 1 - eps follow the mix, otherwise a fair coin.
inline int epsilon_greedy(const ActionDist& dist, double eps, CounterRng& rng) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("epsilon_greedy: eps must lie in [0, 1]");
  if (rng.bernoulli(eps)) return rng.uniform_int(2);
  return sample_action(dist, rng);
}

/// Per-state defender mix minimizing max_a sum_b beta(b) q-hat(x, a, b).
inline MixedPolicy improve_policy(const WeightVector& theta, const StateSpace& space) {
  std::vector<ActionDist> mix(space.size());
  for (std::size_t s = 0; s < space.size(); ++s) {
    const State x = space.state(s);
    const Matrix2x2 g{{{q_hat(x, 0, 0, theta), q_hat(x, 0, 1, theta)}, {q_hat(x, 1, 0, theta), q_hat(x, 1, 1, theta)}}};
    mix[s] = solve_defender(g).defender_mix;
  }
  return MixedPolicy(space, std::move(mix));
}

inline MixedPolicy improve_policy(const WeightVector& theta, const GameParams& params) {
  return improve_policy(theta, StateSpace(params));
}

/// Attacker counterpart: maximin mix on q-hat.
inline MixedPolicy improve_attacker_policy(const WeightVector& theta, const StateSpace& space) {
  std::vector<ActionDist> mix(space.size());
  for (std::size_t s = 0; s < space.size(); ++s) {
    const State x = space.state(s);
    const Matrix2x2 g{{{q_hat(x, 0, 0, theta), q_hat(x, 0, 1, theta)}, {q_hat(x, 1, 0, theta), q_hat(x, 1, 1, theta)}}};
    mix[s] = solve_attacker(g).attacker_mix;
  }
  return MixedPolicy(space, std::move(mix));
}

// Attacker models for closed-loop experiments. The defender only ever sees
// the realized action.
struct FixedMixedAttacker {
  MixedPolicy policy;
};
/// Best response to the defender's announced mix, recomputed exactly at
/// the start of every outer iteration. With `explore` set it deviates to a
/// fair coin at the same epsilon_t as the defender; otherwise the data holds
/// no off-response actions and the attack-cost weight is unidentifiable.
struct BestResponderAttacker {
  bool explore = true;
};
/// Symmetric LSPI from the attacker's side on the same data.
struct MirrorLearnerAttacker {};
struct RandomUniformAttacker {};

using AttackerSpec =
    std::variant<FixedMixedAttacker, BestResponderAttacker, MirrorLearnerAttacker, RandomUniformAttacker>;

inline std::string attacker_name(const AttackerSpec& spec) {
  switch (spec.index()) {
    case 0: return "fixed_mixed";
    case 1: return "best_responder";
    case 2: return "mirror_learner";
    default: return "random_uniform";
  }
}

/// Runtime state of an attacker model.
class Attacker {
 public:
  Attacker(AttackerSpec spec, const GameParams& params, std::size_t state_cap = kDefaultStateCap)
      : spec_(std::move(spec)), params_(params), space_(params, state_cap) {
    if (auto* fixed = std::get_if<FixedMixedAttacker>(&spec_)) {
      if (!(fixed->policy.space() == space_)) throw DomainError("fixed attacker policy on a different state space");
      current_ = fixed->policy;
    } else if (std::holds_alternative<MirrorLearnerAttacker>(spec_)) {
      theta_ = WeightVector::Zero(params.feature_dim());
      current_ = improve_attacker_policy(*theta_, space_);
    } else if (std::holds_alternative<BestResponderAttacker>(spec_)) {
      game_ = std::make_shared<TabularGame>(params, state_cap);
    }
  }

  const AttackerSpec& spec() const noexcept { return spec_; }

  /// Called with the defender's mix before each collection phase.
  void prepare(const MixedPolicy& beta) {
    if (std::holds_alternative<BestResponderAttacker>(spec_)) current_ = best_response_value(beta, *game_).policy;
  }

  /// Called with each finished dataset.
  void observe(const Dataset& ds, const EvaluationOptions& inner) {
    if (!std::holds_alternative<MirrorLearnerAttacker>(spec_)) return;
    EvaluationOptions opts = inner;
    opts.perspective = Perspective::Attacker;
    theta_ = evaluate_policy(ds, *current_, params_, opts, theta_).theta;
    current_ = improve_attacker_policy(*theta_, space_);
  }

  int act(const State& x, double eps, CounterRng& rng) const {
    if (std::holds_alternative<RandomUniformAttacker>(spec_)) return rng.uniform_int(2);
    if (!current_) throw std::logic_error("Attacker::act before prepare");
    if (std::holds_alternative<MirrorLearnerAttacker>(spec_)) return epsilon_greedy((*current_)(x), eps, rng);
    if (const auto* br = std::get_if<BestResponderAttacker>(&spec_); br && br->explore)
      return epsilon_greedy((*current_)(x), eps, rng);
    return sample_action((*current_)(x), rng);
  }

  const std::optional<MixedPolicy>& policy() const noexcept { return current_; }

 private:
  AttackerSpec spec_;
  GameParams params_;
  StateSpace space_;
  std::shared_ptr<const TabularGame> game_;
  std::optional<MixedPolicy> current_;
  std::optional<WeightVector> theta_;
};

/// Initial state distribution: a point mass, or uniform over {0..L}^m.
struct InitialDistribution {
  std::optional<State> point;  ///< empty means uniform

  static InitialDistribution empty_system(const GameParams& params) {
    return {State(std::vector<int>(static_cast<std::size_t>(params.m), 0))};
  }
  static InitialDistribution at(State x) { return {std::move(x)}; }
  static InitialDistribution uniform() { return {}; }

  State sample(const GameParams& params, CounterRng& rng) const {
    if (point) {
      validate_state(*point, params);
      return *point;
    }
    std::vector<int> q(static_cast<std::size_t>(params.m));
    for (auto& v : q) v = rng.uniform_int(params.L + 1);
    return State(std::move(q));
  }
};

struct Rollout {
  Dataset data;
  State final_state;
};

/// One trajectory of n steps. The exploration clock starts at t0. The
/// returned dataset is frozen.
inline Rollout collect(const MixedPolicy& beta, const Attacker& attacker, std::size_t n,
                       const ExplorationSchedule& schedule, const GameParams& params, CounterRng& rng,
                       const InitialDistribution& x0, std::size_t t0 = 0) {
  if (n == 0) throw DomainError("collect: n must be >= 1");
  schedule.validate();
  Rollout out;
  State x = x0.sample(params, rng);
  for (std::size_t t = 0; t < n; ++t) {
    const double eps = schedule.at(t0 + t);
    const int b = epsilon_greedy(beta(x), eps, rng);
    const int a = attacker.act(x, eps, rng);
    Transition tr = sample_transition(x, a, b, params, rng);
    out.data.append({x, a, b, realized_reward(x, a, b, tr.dt, params), tr.next, tr.dt});
    x = std::move(tr.next);
  }
  out.data.freeze();
  out.final_state = std::move(x);
  return out;
}

/// `visits` transitions drawn from every (x, a, b), interleaved round-robin
/// over the enumeration.
inline Dataset collect_exhaustive(const GameParams& params, std::size_t visits, CounterRng& rng) {
  const StateSpace space(params);
  Dataset ds;
  for (std::size_t round = 0; round < visits; ++round)
    for (std::size_t s = 0; s < space.size(); ++s) {
      const State x = space.state(s);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const Transition tr = sample_transition(x, a, b, params, rng);
          ds.append({x, a, b, realized_reward(x, a, b, tr.dt, params), tr.next, tr.dt});
        }
    }
  ds.freeze();
  return ds;
}

struct TrainConfig {
  GameParams params;
  std::size_t n = 1000;  ///< samples per outer iteration
  ExplorationSchedule exploration;
  double theta_tol = 1e-3;
  std::size_t max_outer_iters = 20;
  std::uint64_t seed = 0;
  AttackerSpec attacker = RandomUniformAttacker{};
  EvaluationOptions inner;
  std::optional<State> x0;  ///< empty system when unset
  std::size_t state_cap = kDefaultStateCap;

  void validate() const {
    params.validate();
    exploration.validate();
    if (n <= static_cast<std::size_t>(params.feature_dim()))
      throw DomainError("train: n must exceed the feature dimension");
    if (!(theta_tol > 0.0)) throw DomainError("train: theta_tol must be > 0");
    if (max_outer_iters == 0) throw DomainError("train: max_outer_iters must be >= 1");
    if (x0) validate_state(*x0, params);
  }
};

struct IterationDiagnostics {
  std::size_t iteration = 0;
  double td_error = 0.0;  ///< ||Y(theta) - Phi theta||_sigma on the iteration's data
  double epsilon = 0.0;   ///< exploration rate at the end of collection
  std::size_t dataset_size = 0;
  std::size_t inner_iterations = 0;
  bool inner_converged = false;
  double theta_change = 0.0;
};

struct TrainReport {
  std::vector<WeightVector> theta_trace;
  std::vector<IterationDiagnostics> diagnostics;
  std::optional<MixedPolicy> beta_final;
  bool converged = false;

  // State of the final iteration, kept for diagnostics against the oracle.
  std::optional<MixedPolicy> beta_evaluated;  ///< mix that theta_trace.back() evaluates
  Dataset last_dataset;
};

/// Raised by train() with the trace up to the failing outer iteration.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, std::size_t iteration, TrainReport partial)
      : DivergenceError(what, iteration), partial_(std::move(partial)) {}
  const TrainReport& partial() const noexcept { return partial_; }

 private:
  TrainReport partial_;
};

inline TrainReport train(const TrainConfig& cfg) {
  cfg.validate();
  const GameParams& params = cfg.params;
  const StateSpace space(params, cfg.state_cap);
  CounterRng root(cfg.seed);
  Attacker attacker(cfg.attacker, params, cfg.state_cap);

  TrainReport report;
  WeightVector theta = WeightVector::Zero(params.feature_dim());
  MixedPolicy beta = improve_policy(theta, space);
  InitialDistribution x0 = cfg.x0 ? InitialDistribution::at(*cfg.x0) : InitialDistribution::empty_system(params);
  std::size_t clock = 0;

  for (std::size_t k = 0; k < cfg.max_outer_iters; ++k) {
    CounterRng rng = root.split(k);
    attacker.prepare(beta);
    Rollout rollout = collect(beta, attacker, cfg.n, cfg.exploration, params, rng, x0, clock);
    clock += cfg.n;
    x0 = InitialDistribution::at(rollout.final_state);

    EvaluationResult eval;
    const PolicyEvaluator evaluator(rollout.data, beta, params, cfg.inner.mode, Perspective::Defender);
    try {
      eval = evaluator.run(theta, cfg.inner);
    } catch (const DivergenceError& e) {
      throw TrainingDiverged(std::string("outer iteration ") + std::to_string(k) + ": " + e.what(), k,
                             std::move(report));
    }
    attacker.observe(rollout.data, cfg.inner);

    IterationDiagnostics diag;
    diag.iteration = k;
    diag.td_error = sigma_norm(evaluator.targets(eval.theta) - feature_matrix(rollout.data) * eval.theta);
    diag.epsilon = cfg.exploration.at(clock - 1);
    diag.dataset_size = rollout.data.size();
    diag.inner_iterations = eval.iterations;
    diag.inner_converged = eval.converged;
    diag.theta_change = (eval.theta - theta).norm();

    report.beta_evaluated = beta;
    report.last_dataset = std::move(rollout.data);
    report.theta_trace.push_back(eval.theta);
    report.diagnostics.push_back(diag);

    theta = eval.theta;
    beta = improve_policy(theta, space);
    if (diag.theta_change < cfg.theta_tol) {
      report.converged = true;
      break;
    }
  }
  report.beta_final = beta;
  return report;
}

/// Smallest horizon H with gamma^H q_max < truncation.
inline std::size_t horizon_for_truncation(const GameParams& params, double truncation) {
  if (!(truncation > 0.0)) throw DomainError("truncation error must be > 0");
  if (params.gamma == 0.0) return 1;
  const double q_max = params.q_max();
  if (q_max < truncation) return 1;
  return static_cast<std::size_t>(std::floor(std::log(truncation / q_max) / std::log(params.gamma))) + 1;
}

struct RolloutEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo estimate of the discounted cost sum_k gamma^k r_k with
/// realized rewards. Rollout i draws from rng.split(i).
inline RolloutEstimate evaluate_policy_rollout(const MixedPolicy& beta, const Attacker& attacker, std::size_t horizon,
                                               std::size_t n_rollouts, const GameParams& params, const CounterRng& rng,
                                               const InitialDistribution& x0) {
  if (n_rollouts == 0) throw DomainError("evaluate_policy_rollout: n_rollouts must be >= 1");
  if (horizon == 0) throw DomainError("evaluate_policy_rollout: horizon must be >= 1");
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n_rollouts; ++i) {
    CounterRng stream = rng.split(i);
    State x = x0.sample(params, stream);
    double discount = 1.0, total = 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
      const int b = sample_action(beta(x), stream);
      const int a = attacker.act(x, 0.0, stream);
      Transition tr = sample_transition(x, a, b, params, stream);
      total += discount * realized_reward(x, a, b, tr.dt, params);
      discount *= params.gamma;
      x = std::move(tr.next);
    }
    sum += total;
    sum_sq += total * total;
  }
  const auto n = static_cast<double>(n_rollouts);
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n)};
}

}  // namespace mlspi
