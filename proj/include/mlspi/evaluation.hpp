#pragma once

// Sample-based policy evaluation: dataset bookkeeping, the empirical kernel
// (p-hat and the confidence weights w), Bellman targets and the fitted-Q
// fixed-point iteration theta <- Phi^+ Y(theta).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mlspi/errors.hpp"
#include "mlspi/features.hpp"
#include "mlspi/game_model.hpp"
#include "mlspi/state_space.hpp"

namespace mlspi {

/// A state together with a joint action.
struct Triple {
  State x;
  int a = 0;
  int b = 0;

  auto operator<=>(const Triple&) const = default;
};

struct Sample {
  State x;
  int a = 0;
  int b = 0;
  double r = 0.0;  ///< realized reward rho(x, a, b) * dt
  State x_next;
  double dt = 0.0;

  Triple triple() const { return {x, a, b}; }
  bool operator==(const Sample&) const = default;
};

/// Sampled reward rho(x, a, b) * dt using the realized sojourn.
inline double realized_reward(const State& x, int a, int b, double dt, const GameParams& params) {
  if (!(dt > 0.0)) throw DomainError("realized_reward: dt must be > 0");
  return instantaneous_reward(x, a, b, params) * dt;
}

/// Ordered transition samples with visit counts. Append-only until frozen.
class Dataset {
 public:
  void append(Sample s) {
    if (frozen_) throw std::logic_error("Dataset: append after freeze");
    if (!(s.dt > 0.0)) throw DomainError("Dataset: sample dt must be > 0");
    if (s.x.size() != s.x_next.size()) throw DomainError("Dataset: state length mismatch");
    if (!samples_.empty() && s.x.size() != samples_.front().x.size())
      throw DomainError("Dataset: state length differs from earlier samples");
    validate_action(s.a);
    validate_action(s.b);
    const Triple t = s.triple();
    ++counts_[t];
    ++successors_[t][s.x_next];
    samples_.push_back(std::move(s));
  }

  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const std::vector<Sample>& samples() const noexcept { return samples_; }
  const Sample& operator[](std::size_t k) const { return samples_[k]; }

  std::size_t count(const Triple& t) const {
    const auto it = counts_.find(t);
    return it == counts_.end() ? 0 : it->second;
  }

  std::size_t pair_count(const Triple& t, const State& next) const {
    const auto it = successors_.find(t);
    if (it == successors_.end()) return 0;
    const auto jt = it->second.find(next);
    return jt == it->second.end() ? 0 : jt->second;
  }

  const std::map<Triple, std::size_t>& counts() const noexcept { return counts_; }
  const std::map<Triple, std::map<State, std::size_t>>& successor_counts() const noexcept {
    return successors_;
  }

  /// Every sample lies in {0..L}^m for these parameters.
  void check_compatible(const GameParams& params) const {
    for (const auto& s : samples_) {
      validate_state(s.x, params);
      validate_state(s.x_next, params);
    }
  }

 private:
  std::vector<Sample> samples_;
  std::map<Triple, std::size_t> counts_;
  std::map<Triple, std::map<State, std::size_t>> successors_;
  bool frozen_ = false;
};

/// Ratio-of-counts estimate of the transition kernel over the stored
/// (x, a, b, x_next) pairs, plus w = count^{-1/2}.
class EmpiricalKernel {
 public:
  using Successors = std::vector<std::pair<State, double>>;

  EmpiricalKernel(std::map<Triple, Successors> p_hat, std::map<Triple, double> w,
                  std::map<Triple, double> mean_reward, double default_w)
      : p_hat_(std::move(p_hat)), w_(std::move(w)), mean_reward_(std::move(mean_reward)),
        default_w_(default_w) {}

  /// Empty for unobserved triples (p-hat identically zero).
  const Successors& p_hat(const Triple& t) const {
    static const Successors kNone;
    const auto it = p_hat_.find(t);
    return it == p_hat_.end() ? kNone : it->second;
  }

  double p_hat(const Triple& t, const State& next) const {
    for (const auto& [s, p] : p_hat(t))
      if (s == next) return p;
    return 0.0;
  }

  double w(const Triple& t) const {
    const auto it = w_.find(t);
    return it == w_.end() ? default_w_ : it->second;
  }

  /// Mean realized reward over the samples of an observed triple.
  std::optional<double> mean_reward(const Triple& t) const {
    const auto it = mean_reward_.find(t);
    if (it == mean_reward_.end()) return std::nullopt;
    return it->second;
  }

  double default_w() const noexcept { return default_w_; }
  const std::map<Triple, Successors>& observed() const noexcept { return p_hat_; }

 private:
  std::map<Triple, Successors> p_hat_;
  std::map<Triple, double> w_;
  std::map<Triple, double> mean_reward_;
  double default_w_;
};

inline EmpiricalKernel empirical_transitions(const Dataset& ds, const GameParams& params) {
  std::map<Triple, EmpiricalKernel::Successors> p_hat;
  std::map<Triple, double> w;
  std::map<Triple, double> reward_sum;
  for (const auto& s : ds.samples()) reward_sum[s.triple()] += s.r;
  for (const auto& [t, successors] : ds.successor_counts()) {
    const auto n = static_cast<double>(ds.count(t));
    auto& dist = p_hat[t];
    for (const auto& [next, c] : successors) dist.emplace_back(next, static_cast<double>(c) / n);
    w[t] = 1.0 / std::sqrt(n);
    reward_sum[t] /= n;
  }
  return EmpiricalKernel(std::move(p_hat), std::move(w), std::move(reward_sum),
                         params.rho_max() / (params.lambda * (1.0 - params.gamma)));
}

/// Row k is phi(x_k, a_k, b_k).
inline Eigen::MatrixXd feature_matrix(const Dataset& ds) {
  if (ds.empty()) return {};
  const int d = ds[0].x.size() + 2;
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(ds.size()), d);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto& s = ds[k];
    phi.row(static_cast<Eigen::Index>(k)) = feature_vector(s.x, s.a, s.b).transpose();
  }
  return phi;
}

/// Whose value is being evaluated. The defender evaluates its own mix beta
/// against a best-responding attacker (max over a'); the attacker evaluates
/// alpha against a best-responding defender (min over b').
enum class Perspective { Defender, Attacker };

/// The evaluating player's mix averaged into the successor features, one
/// row per opponent action: row j = sum_i pi(i | x) phi(x, ., .) with the
/// opponent playing j.
inline Eigen::Matrix<double, 2, Eigen::Dynamic> policy_features(const State& x, const ActionDist& pi,
                                                                 Perspective who) {
  const int d = x.size() + 2;
  Eigen::Matrix<double, 2, Eigen::Dynamic> rows(2, d);
  for (int j = 0; j < 2; ++j) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < 2; ++i) {
      if (pi[static_cast<std::size_t>(i)] == 0.0) continue;
      const int a = who == Perspective::Defender ? j : i;
      const int b = who == Perspective::Defender ? i : j;
      acc += pi[static_cast<std::size_t>(i)] * feature_vector(x, a, b);
    }
    rows.row(j) = acc.transpose();
  }
  return rows;
}

/// max_{a'} sum_{b'} beta(b'|x) q(x, a', b'; theta) for the defender, and
/// the mirrored min_{b'} sum_{a'} alpha(a'|x) q for the attacker.
inline double continuation_value(const State& x, const ActionDist& pi, const WeightVector& theta,
                                 Perspective who = Perspective::Defender) {
  const Eigen::Vector2d v = policy_features(x, pi, who) * theta;
  return who == Perspective::Defender ? v.maxCoeff() : v.minCoeff();
}

/// Fitted-Q target from the observed successor:
/// r + gamma max_{a'} sum_{b'} beta(b'|x') q(x', a', b'; theta_prev).
inline double bellman_target(const Sample& s, const MixedPolicy& beta, const WeightVector& theta_prev,
                             const GameParams& params) {
  return s.r + params.gamma * continuation_value(s.x_next, beta(s.x_next), theta_prev);
}

/// [T-hat q](x_k, a_k, b_k) for every sample, with expectation under p-hat.
/// Component k uses the sample's own realized reward.
inline Eigen::VectorXd empirical_bellman(const WeightVector& theta, const Dataset& ds,
                                         const EmpiricalKernel& kernel, const MixedPolicy& beta,
                                         const GameParams& params,
                                         Perspective who = Perspective::Defender) {
  std::map<State, double> cache;
  auto value_at = [&](const State& x) {
    auto it = cache.find(x);
    if (it == cache.end()) it = cache.emplace(x, continuation_value(x, beta(x), theta, who)).first;
    return it->second;
  };
  Eigen::VectorXd out(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto& s = ds[k];
    double expectation = 0.0;
    for (const auto& [next, p] : kernel.p_hat(s.triple())) expectation += p * value_at(next);
    out[static_cast<Eigen::Index>(k)] = s.r + params.gamma * expectation;
  }
  return out;
}

enum class TargetMode {
  ObservedSuccessor,  ///< y_k from the stored x_next
  EmpiricalKernel,    ///< y_k = [T-hat Phi theta]_k under p-hat
};

struct EvaluationOptions {
  double tol = 1e-8;
  std::size_t max_iter = 500;
  TargetMode mode = TargetMode::ObservedSuccessor;
  Perspective perspective = Perspective::Defender;
  double divergence_norm = 1e12;
};

struct EvaluationResult {
  WeightVector theta;
  bool converged = false;
  std::size_t iterations = 0;
  double last_change = 0.0;
};

/// Factors Phi once and runs theta <- Phi^+ Y(theta) on a frozen dataset.
class PolicyEvaluator {
 public:
  PolicyEvaluator(const Dataset& ds, const MixedPolicy& policy, const GameParams& params,
                  TargetMode mode = TargetMode::ObservedSuccessor,
                  Perspective who = Perspective::Defender)
      : gamma_(params.gamma), mode_(mode), who_(who), n_(ds.size()), d_(params.feature_dim()),
        solver_(checked_design(ds, params)) {
    rewards_.resize(static_cast<Eigen::Index>(n_));
    for (std::size_t k = 0; k < n_; ++k) rewards_[static_cast<Eigen::Index>(k)] = ds[k].r;

    if (mode_ == TargetMode::ObservedSuccessor) {
      for (int j = 0; j < 2; ++j) successor_[j].resize(static_cast<Eigen::Index>(n_), d_);
      std::map<State, Eigen::Matrix<double, 2, Eigen::Dynamic>> cache;
      for (std::size_t k = 0; k < n_; ++k) {
        const State& next = ds[k].x_next;
        auto it = cache.find(next);
        if (it == cache.end()) it = cache.emplace(next, policy_features(next, policy(next), who_)).first;
        for (int j = 0; j < 2; ++j) successor_[j].row(static_cast<Eigen::Index>(k)) = it->second.row(j);
      }
    } else {
      const EmpiricalKernel kernel = empirical_transitions(ds, params);
      std::map<State, std::size_t> state_slot;
      sample_terms_.resize(n_);
      for (std::size_t k = 0; k < n_; ++k) {
        for (const auto& [next, p] : kernel.p_hat(ds[k].triple())) {
          auto it = state_slot.find(next);
          if (it == state_slot.end()) {
            it = state_slot.emplace(next, state_features_.size()).first;
            state_features_.push_back(policy_features(next, policy(next), who_));
          }
          sample_terms_[k].emplace_back(it->second, p);
        }
      }
    }
  }

  const LeastSquares& solver() const noexcept { return solver_; }
  const Eigen::VectorXd& rewards() const noexcept { return rewards_; }

  /// Y(theta), one target per sample.
  Eigen::VectorXd targets(const WeightVector& theta) const {
    check_theta(theta);
    if (gamma_ == 0.0) return rewards_;
    if (mode_ == TargetMode::ObservedSuccessor) {
      const Eigen::VectorXd v0 = successor_[0] * theta;
      const Eigen::VectorXd v1 = successor_[1] * theta;
      const Eigen::VectorXd best =
          who_ == Perspective::Defender ? v0.cwiseMax(v1).eval() : v0.cwiseMin(v1).eval();
      return rewards_ + gamma_ * best;
    }
    std::vector<double> values(state_features_.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Eigen::Vector2d v = state_features_[i] * theta;
      values[i] = who_ == Perspective::Defender ? v.maxCoeff() : v.minCoeff();
    }
    Eigen::VectorXd y = rewards_;
    for (std::size_t k = 0; k < n_; ++k) {
      double expectation = 0.0;
      for (const auto& [slot, p] : sample_terms_[k]) expectation += p * values[slot];
      y[static_cast<Eigen::Index>(k)] += gamma_ * expectation;
    }
    return y;
  }

  /// One least-squares step: Phi^+ Y(theta_prev).
  WeightVector step(const WeightVector& theta_prev) const { return solver_.solve(targets(theta_prev)); }

  EvaluationResult run(const WeightVector& theta0, const EvaluationOptions& opts) const {
    if (!(opts.tol > 0.0)) throw DomainError("evaluate_policy: tol must be > 0");
    check_theta(theta0);
    EvaluationResult out{theta0, false, 0, 0.0};
    for (std::size_t it = 1; it <= opts.max_iter; ++it) {
      WeightVector next = step(out.theta);
      if (!next.allFinite() || next.norm() > opts.divergence_norm)
        throw DivergenceError("policy evaluation diverged at step " + std::to_string(it), it);
      out.last_change = (next - out.theta).norm();
      out.theta = std::move(next);
      out.iterations = it;
      // Without discounting the targets do not depend on theta: one step is exact.
      if (out.last_change < opts.tol || gamma_ == 0.0) {
        out.converged = true;
        break;
      }
    }
    return out;
  }

 private:
  static Eigen::MatrixXd checked_design(const Dataset& ds, const GameParams& params) {
    if (ds.size() < static_cast<std::size_t>(params.feature_dim()))
      throw InsufficientData("policy evaluation needs at least d = " +
                             std::to_string(params.feature_dim()) + " samples, got " +
                             std::to_string(ds.size()));
    ds.check_compatible(params);
    return feature_matrix(ds);
  }

  void check_theta(const WeightVector& theta) const {
    if (theta.size() != d_) throw DomainError("theta has wrong length");
  }

  double gamma_;
  TargetMode mode_;
  Perspective who_;
  std::size_t n_;
  Eigen::Index d_;
  LeastSquares solver_;
  Eigen::VectorXd rewards_;
  Eigen::MatrixXd successor_[2];
  std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> state_features_;
  std::vector<std::vector<std::pair<std::size_t, double>>> sample_terms_;
};

/// Minimum-norm minimizer of sum_t (y_t - phi_t theta)^2 with y_t the
/// fitted-Q targets under theta_prev.
inline WeightVector least_squares_step(const Dataset& ds, const MixedPolicy& beta,
                                       const WeightVector& theta_prev, const GameParams& params) {
  return PolicyEvaluator(ds, beta, params).step(theta_prev);
}

/// Iterates least_squares_step from theta0 (zero by default) until the
/// weight change drops below opts.tol or opts.max_iter steps have run.
inline EvaluationResult evaluate_policy(const Dataset& ds, const MixedPolicy& beta,
                                        const GameParams& params, const EvaluationOptions& opts = {},
                                        std::optional<WeightVector> theta0 = std::nullopt) {
  const PolicyEvaluator evaluator(ds, beta, params, opts.mode, opts.perspective);
  return evaluator.run(theta0.value_or(WeightVector::Zero(params.feature_dim())), opts);
}

}  // namespace mlspi
