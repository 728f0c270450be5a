#pragma once

// Ground truth on the full enumerated state space: Shapley value iteration
// for the Markov perfect equilibrium, exact evaluation of a policy pair and
// single-player best responses. Only feasible at desk scale.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mlspi/errors.hpp"
#include "mlspi/game_model.hpp"
#include "mlspi/matrix_game.hpp"
#include "mlspi/state_space.hpp"

namespace mlspi {

/// Dense (state, a, b) -> value table.
class QTable {
 public:
  explicit QTable(StateSpace space) : space_(space), values_(space.size() * 4, 0.0) {}

  const StateSpace& space() const noexcept { return space_; }

  static std::size_t slot(std::size_t s, int a, int b) noexcept {
    return s * 4 + static_cast<std::size_t>(a) * 2 + static_cast<std::size_t>(b);
  }

  double operator()(std::size_t s, int a, int b) const { return values_[slot(s, a, b)]; }
  double& operator()(std::size_t s, int a, int b) { return values_[slot(s, a, b)]; }
  double at(const State& x, int a, int b) const { return (*this)(space_.index(x), a, b); }

  Matrix2x2 matrix(std::size_t s) const {
    return {{{(*this)(s, 0, 0), (*this)(s, 0, 1)}, {(*this)(s, 1, 0), (*this)(s, 1, 1)}}};
  }

  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  double sup_distance(const QTable& o) const {
    double d = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) d = std::max(d, std::abs(values_[i] - o.values_[i]));
    return d;
  }

 private:
  StateSpace space_;
  std::vector<double> values_;
};

/// Rewards and kernel of the embedded chain for every (state, a, b).
class TabularGame {
 public:
  struct Entry {
    std::size_t next;
    double probability;
  };

  explicit TabularGame(const GameParams& params, std::size_t cap = kDefaultStateCap)
      : params_(params), space_(params, cap) {
    params.validate();
    reward_.resize(space_.size() * 4);
    offsets_.reserve(space_.size() * 4 + 1);
    offsets_.push_back(0);
    for (std::size_t s = 0; s < space_.size(); ++s) {
      const State x = space_.state(s);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          reward_[QTable::slot(s, a, b)] = expected_reward(x, a, b, params);
          for (const auto& o : transition_distribution(x, a, b, params).outcomes)
            entries_.push_back({space_.index(o.next), o.probability});
          offsets_.push_back(entries_.size());
        }
    }
  }

  const GameParams& params() const noexcept { return params_; }
  const StateSpace& space() const noexcept { return space_; }
  std::size_t num_states() const noexcept { return space_.size(); }

  double reward(std::size_t s, int a, int b) const { return reward_[QTable::slot(s, a, b)]; }

  template <typename Fn>
  void for_each_successor(std::size_t s, int a, int b, Fn&& fn) const {
    const std::size_t k = QTable::slot(s, a, b);
    for (std::size_t e = offsets_[k]; e < offsets_[k + 1]; ++e) fn(entries_[e].next, entries_[e].probability);
  }

  double expected_next(std::size_t s, int a, int b, const std::vector<double>& v) const {
    double acc = 0.0;
    for_each_successor(s, a, b, [&](std::size_t next, double p) { acc += p * v[next]; });
    return acc;
  }

  /// q(s, a, b) = r + gamma sum_{s'} p(s'|s, a, b) v(s').
  QTable backup(const std::vector<double>& v) const {
    QTable q(space_);
    for (std::size_t s = 0; s < space_.size(); ++s)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) q(s, a, b) = reward(s, a, b) + params_.gamma * expected_next(s, a, b, v);
    return q;
  }

 private:
  GameParams params_;
  StateSpace space_;
  std::vector<double> reward_;
  std::vector<std::size_t> offsets_;
  std::vector<Entry> entries_;
};

struct SolverOptions {
  double tol = 1e-10;
  std::size_t max_iter = 100'000;
  std::size_t state_cap = kDefaultStateCap;
};

struct ShapleyResult {
  QTable q;
  std::vector<double> v;
  MixedPolicy alpha;
  MixedPolicy beta;
  std::size_t iterations = 0;
  std::vector<double> sup_diffs;  ///< sup-norm change of q per iteration
};

/// Per-state minimax values of q.
inline std::vector<double> minimax_values(const QTable& q) {
  std::vector<double> v(q.space().size());
  for (std::size_t s = 0; s < v.size(); ++s) v[s] = solve_defender(q.matrix(s)).value;
  return v;
}

/// sup |q - (r + gamma P val(q))|.
inline double bellman_residual(const QTable& q, const TabularGame& game) {
  return q.sup_distance(game.backup(minimax_values(q)));
}

inline ShapleyResult shapley_value_iteration(const TabularGame& game, const SolverOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw DomainError("shapley_value_iteration: tol must be > 0");
  QTable q(game.space());
  std::vector<double> diffs;
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    QTable next = game.backup(minimax_values(q));
    const double diff = next.sup_distance(q);
    diffs.push_back(diff);
    q = std::move(next);
    if (diff < opts.tol) {
      const StateSpace& space = game.space();
      std::vector<double> v(space.size());
      std::vector<ActionDist> alpha(space.size()), beta(space.size());
      for (std::size_t s = 0; s < space.size(); ++s) {
        const GameSolution sol = solve_defender(q.matrix(s));
        v[s] = sol.value;
        alpha[s] = sol.attacker_mix;
        beta[s] = sol.defender_mix;
      }
      return {std::move(q), std::move(v), MixedPolicy(space, std::move(alpha)),
              MixedPolicy(space, std::move(beta)), it, std::move(diffs)};
    }
  }
  throw ConvergenceError("Shapley value iteration did not reach tol " + std::to_string(opts.tol) +
                         " within " + std::to_string(opts.max_iter) + " iterations");
}

inline ShapleyResult shapley_value_iteration(const GameParams& params, const SolverOptions& opts = {}) {
  return shapley_value_iteration(TabularGame(params, opts.state_cap), opts);
}

/// Exact q_{alpha,beta} = r + gamma P v with v solving
/// (I - gamma P_{alpha,beta}) v = r_{alpha,beta} by sparse LU.
inline QTable policy_value(const MixedPolicy& alpha, const MixedPolicy& beta, const TabularGame& game) {
  const StateSpace& space = game.space();
  if (!(alpha.space() == space) || !(beta.space() == space))
    throw DomainError("policy_value: policy defined on a different state space");
  const auto n = static_cast<Eigen::Index>(space.size());
  const double gamma = game.params().gamma;

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t s = 0; s < space.size(); ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    triplets.emplace_back(row, row, 1.0);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const double w = alpha.at(s)[static_cast<std::size_t>(a)] * beta.at(s)[static_cast<std::size_t>(b)];
        if (w == 0.0) continue;
        rhs[row] += w * game.reward(s, a, b);
        game.for_each_successor(s, a, b, [&](std::size_t next, double p) {
          triplets.emplace_back(row, static_cast<Eigen::Index>(next), -gamma * w * p);
        });
      }
  }
  Eigen::SparseMatrix<double> system(n, n);
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(system);
  if (lu.info() != Eigen::Success) throw ConvergenceError("policy_value: singular evaluation system");
  const Eigen::VectorXd v = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !v.allFinite())
    throw ConvergenceError("policy_value: linear solve failed");
  return game.backup(std::vector<double>(v.data(), v.data() + v.size()));
}

inline QTable policy_value(const MixedPolicy& alpha, const MixedPolicy& beta, const GameParams& params) {
  return policy_value(alpha, beta, TabularGame(params));
}

/// State values v(s) = sum_{a,b} alpha(a|s) beta(b|s) q(s, a, b).
inline std::vector<double> state_values(const QTable& q, const MixedPolicy& alpha, const MixedPolicy& beta) {
  std::vector<double> v(q.space().size(), 0.0);
  for (std::size_t s = 0; s < v.size(); ++s)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        v[s] += alpha.at(s)[static_cast<std::size_t>(a)] * beta.at(s)[static_cast<std::size_t>(b)] * q(s, a, b);
  return v;
}

struct BestResponse {
  MixedPolicy policy;  ///< pure, lowest action on ties
  std::vector<double> v;
  std::size_t iterations = 0;
};

namespace detail {

// Value iteration for the MDP left to one player when the other plays
// `fixed`. The attacker maximizes, the defender minimizes.
inline BestResponse best_response(const MixedPolicy& fixed, const TabularGame& game, bool attacker,
                                  double tol, std::size_t max_iter) {
  const StateSpace& space = game.space();
  if (!(fixed.space() == space)) throw DomainError("best response: policy on a different state space");
  const double gamma = game.params().gamma;
  const std::size_t S = space.size();

  auto action_value = [&](std::size_t s, int own, const std::vector<double>& v) {
    double acc = 0.0;
    for (int o = 0; o < 2; ++o) {
      const double w = fixed.at(s)[static_cast<std::size_t>(o)];
      if (w == 0.0) continue;
      const int a = attacker ? own : o;
      const int b = attacker ? o : own;
      acc += w * (game.reward(s, a, b) + gamma * game.expected_next(s, a, b, v));
    }
    return acc;
  };
  auto better = [&](double cand, double incumbent) {
    const double margin = 1e-12 * std::max(1.0, std::abs(incumbent));
    return attacker ? cand > incumbent + margin : cand < incumbent - margin;
  };

  std::vector<double> v(S, 0.0), next(S);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    double diff = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      const double q0 = action_value(s, 0, v);
      const double q1 = action_value(s, 1, v);
      next[s] = attacker ? std::max(q0, q1) : std::min(q0, q1);
      diff = std::max(diff, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (diff < tol) {
      std::vector<ActionDist> greedy(S);
      for (std::size_t s = 0; s < S; ++s) {
        const int pick = better(action_value(s, 1, v), action_value(s, 0, v)) ? 1 : 0;
        greedy[s] = pick == 0 ? ActionDist{1.0, 0.0} : ActionDist{0.0, 1.0};
      }
      return {MixedPolicy(space, std::move(greedy)), std::move(v), it};
    }
  }
  throw ConvergenceError("best-response value iteration did not converge");
}

}  // namespace detail

/// The attacker's optimal reply to a fixed defender mix and its value.
inline BestResponse best_response_value(const MixedPolicy& beta, const TabularGame& game,
                                        double tol = 1e-10, std::size_t max_iter = 100'000) {
  return detail::best_response(beta, game, true, tol, max_iter);
}

inline BestResponse best_response_value(const MixedPolicy& beta, const GameParams& params) {
  return best_response_value(beta, TabularGame(params));
}

/// The defender's optimal reply to a fixed attacker mix and its value.
inline BestResponse defender_best_response(const MixedPolicy& alpha, const TabularGame& game,
                                           double tol = 1e-10, std::size_t max_iter = 100'000) {
  return detail::best_response(alpha, game, false, tol, max_iter);
}

/// Action values of a defender mix against a best-responding attacker:
/// the fixed point of q = r + gamma P max_{a'} E_beta q.
inline QTable defender_q(const MixedPolicy& beta, const TabularGame& game) {
  return policy_value(best_response_value(beta, game).policy, beta, game);
}

/// sup_s |v_BR(beta)(s) - v*(s)|.
inline double exploitability_gap(const MixedPolicy& beta, const TabularGame& game,
                                 const std::vector<double>& v_star) {
  const BestResponse br = best_response_value(beta, game);
  double gap = 0.0;
  for (std::size_t s = 0; s < v_star.size(); ++s) gap = std::max(gap, std::abs(br.v[s] - v_star[s]));
  return gap;
}

}  // namespace mlspi
