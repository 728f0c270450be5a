#pragma once

// Finite-sample evaluation-error bound
//
//   ||Q - Phi theta||_sigma <= e_p + e_st + e_sa
//
//   e_p  = ||Q - Pi Q||_sigma / sqrt(1 - gamma^2)
//   e_st = gamma L^2 (mL + c_b) / (lambda (1 - gamma)^3)
//          * sqrt(2 (m + 2) ln(2 / delta) / (n nu_min))
//   e_sa = ||Pi (mL + c_b) / lambda (1 + gamma / (1 - gamma) C_P sqrt(ln(1 / delta)) W)||_2 / sqrt(n)
//
// together with pointwise diagnostics for its ingredients. Logarithms are
// natural. Everything is evaluated on the sampled design points only.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "mlspi/errors.hpp"
#include "mlspi/evaluation.hpp"
#include "mlspi/exact_solver.hpp"
#include "mlspi/features.hpp"
#include "mlspi/game_model.hpp"

namespace mlspi {

struct BoundReport {
  double e_p = 0.0;
  double e_st = 0.0;
  double e_sa = 0.0;
  double total = 0.0;
  double nu_min = 0.0;
  double c_p_hat = 0.0;
  double delta = 0.1;
  std::size_t n = 0;
  std::optional<double> measured_error;  ///< ||Q - Phi theta||_sigma when known
};

namespace detail {

inline void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
}

}  // namespace detail

/// Smallest C_P for which |p-hat - p| <= C_P sqrt(ln(1/delta)) w holds on
/// every observed triple and every successor in either support.
inline double estimate_cp(const Dataset& ds, const GameParams& params, double delta) {
  detail::check_delta(delta);
  if (ds.empty()) throw InsufficientData("estimate_cp: empty dataset");
  const EmpiricalKernel kernel = empirical_transitions(ds, params);
  const double log_term = std::sqrt(std::log(1.0 / delta));
  double c_p = 0.0;
  for (const auto& [t, p_hat] : kernel.observed()) {
    const TransitionDistribution truth = transition_distribution(t.x, t.a, t.b, params);
    std::map<State, double> gap;
    for (const auto& o : truth.outcomes) gap[o.next] -= o.probability;
    for (const auto& [next, p] : p_hat) gap[next] += p;
    const double scale = log_term * kernel.w(t);
    for (const auto& [next, g] : gap) c_p = std::max(c_p, std::abs(g) / scale);
  }
  return c_p;
}

/// ||Q - Pi Q||_sigma / sqrt(1 - gamma^2).
inline double projection_error(const Eigen::MatrixXd& phi, const Eigen::VectorXd& q_true, double gamma) {
  const Eigen::VectorXd residual = q_true - project(phi, q_true);
  return sigma_norm(residual) / std::sqrt(1.0 - gamma * gamma);
}

inline double sampling_error_true(const GameParams& params, std::size_t n, double nu_min, double delta) {
  detail::check_delta(delta);
  if (n == 0) throw InsufficientData("sampling_error_true: n must be >= 1");
  if (!(nu_min > 0.0)) throw DomainError("sampling_error_true: nu_min must be > 0");
  const double L2 = static_cast<double>(params.L) * params.L;
  const double g = params.gamma;
  const double lead = g * L2 * params.rho_max() / (params.lambda * std::pow(1.0 - g, 3));
  return lead * std::sqrt(2.0 * params.feature_dim() * std::log(2.0 / delta) /
                          (static_cast<double>(n) * nu_min));
}

/// The vector (mL + c_b) / lambda (1 + gamma / (1 - gamma) C_P sqrt(ln 1/delta) W_k).
inline Eigen::VectorXd sampling_error_vector(const Dataset& ds, double c_p, const GameParams& params,
                                             double delta) {
  detail::check_delta(delta);
  const EmpiricalKernel kernel = empirical_transitions(ds, params);
  const double base = params.rho_max() / params.lambda;
  const double factor = params.gamma / (1.0 - params.gamma) * c_p * std::sqrt(std::log(1.0 / delta));
  Eigen::VectorXd v(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t k = 0; k < ds.size(); ++k)
    v[static_cast<Eigen::Index>(k)] = base * (1.0 + factor * kernel.w(ds[k].triple()));
  return v;
}

inline double sampling_error_approx(const Dataset& ds, const Eigen::MatrixXd& phi, double c_p,
                                    const GameParams& params, double delta) {
  if (ds.empty()) throw InsufficientData("sampling_error_approx: empty dataset");
  const Eigen::VectorXd v = sampling_error_vector(ds, c_p, params, delta);
  return project(phi, v).norm() / std::sqrt(static_cast<double>(ds.size()));
}

/// q_true(x_k, a_k, b_k) for every sample.
inline Eigen::VectorXd values_on_samples(const QTable& q, const Dataset& ds) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t k = 0; k < ds.size(); ++k) out[static_cast<Eigen::Index>(k)] = q.at(ds[k].x, ds[k].a, ds[k].b);
  return out;
}

/// All three terms for a dataset and the true action values on it.
inline BoundReport theorem1_bound(const Dataset& ds, const Eigen::MatrixXd& phi, const GameParams& params,
                                  double delta, const Eigen::VectorXd& q_true) {
  detail::check_delta(delta);
  if (q_true.size() != phi.rows()) throw DomainError("theorem1_bound: q_true length differs from n");
  BoundReport r;
  r.delta = delta;
  r.n = ds.size();
  r.nu_min = gram_min_eig(phi);
  r.c_p_hat = estimate_cp(ds, params, delta);
  r.e_p = projection_error(phi, q_true, params.gamma);
  r.e_st = sampling_error_true(params, ds.size(), r.nu_min, delta);
  r.e_sa = sampling_error_approx(ds, phi, r.c_p_hat, params, delta);
  r.total = r.e_p + r.e_st + r.e_sa;
  return r;
}

struct DecompositionCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds() const noexcept { return lhs <= rhs; }
};

/// max_{a'} sum_{b'} beta(b'|x) q(x, a', b') from a table.
inline double table_continuation(const QTable& q, const State& x, const ActionDist& beta) {
  const std::size_t s = q.space().index(x);
  double best = -INFINITY;
  for (int a = 0; a < 2; ++a) best = std::max(best, beta[0] * q(s, a, 0) + beta[1] * q(s, a, 1));
  return best;
}

/// [T-hat Q]_k for a tabulated Q under p-hat.
inline Eigen::VectorXd empirical_bellman_table(const QTable& q, const Dataset& ds, const EmpiricalKernel& kernel,
                                               const MixedPolicy& beta, const GameParams& params) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto& s = ds[k];
    double expectation = 0.0;
    for (const auto& [next, p] : kernel.p_hat(s.triple())) expectation += p * table_continuation(q, next, beta(next));
    out[static_cast<Eigen::Index>(k)] = s.r + params.gamma * expectation;
  }
  return out;
}

/// Both sides of
///   ||Q - Q_s||^2 <= ||Q - Pi Q||^2 + (gamma ||Q - Q_s|| + ||Pi T-hat Q - Pi Q||)^2
/// (sigma-norms) with Q_s = Phi theta_fixed and Q the tabulated truth.
inline DecompositionCheck decomposition_check(const Dataset& ds, const Eigen::MatrixXd& phi,
                                              const MixedPolicy& beta, const WeightVector& theta_fixed,
                                              const GameParams& params, const QTable& q_true) {
  const LeastSquares ls(phi);
  const EmpiricalKernel kernel = empirical_transitions(ds, params);
  const Eigen::VectorXd q = values_on_samples(q_true, ds);
  const Eigen::VectorXd q_s = phi * theta_fixed;
  const Eigen::VectorXd pi_q = ls.project(q);
  const Eigen::VectorXd pi_tq = ls.project(empirical_bellman_table(q_true, ds, kernel, beta, params));

  const double err = sigma_norm(q - q_s);
  const double proj = sigma_norm(q - pi_q);
  const double sampling = sigma_norm(pi_tq - pi_q);
  const double tail = params.gamma * err + sampling;
  return {err * err, proj * proj + tail * tail};
}

struct Lemma3Entry {
  Triple triple;
  double gap = 0.0;    ///< |T-hat q(x,a,b) - T q(x,a,b)|
  double bound = 0.0;  ///< (mL + c_b) / lambda (1 + gamma / (1 - gamma) C_P sqrt(ln 1/delta) w)
};

/// Pointwise operator gap on every observed triple. T-hat uses the mean
/// realized reward and p-hat of the triple, T the expected reward and the
/// true kernel; q-hat is clipped to |q| <= q_max.
inline std::vector<Lemma3Entry> lemma3_check(const Dataset& ds, const WeightVector& theta, const MixedPolicy& beta,
                                             const GameParams& params, double c_p, double delta) {
  detail::check_delta(delta);
  const EmpiricalKernel kernel = empirical_transitions(ds, params);
  const double q_max = params.q_max();
  const double factor = params.gamma / (1.0 - params.gamma) * c_p * std::sqrt(std::log(1.0 / delta));
  auto clipped_continuation = [&](const State& x) {
    const ActionDist& pi = beta(x);
    double best = -INFINITY;
    for (int a = 0; a < 2; ++a) {
      double acc = 0.0;
      for (int b = 0; b < 2; ++b)
        acc += pi[static_cast<std::size_t>(b)] * std::clamp(q_hat(x, a, b, theta), -q_max, q_max);
      best = std::max(best, acc);
    }
    return best;
  };

  std::vector<Lemma3Entry> out;
  for (const auto& [t, p_hat] : kernel.observed()) {
    double empirical = *kernel.mean_reward(t);
    for (const auto& [next, p] : p_hat) empirical += params.gamma * p * clipped_continuation(next);
    double exact = expected_reward(t.x, t.a, t.b, params);
    for (const auto& o : transition_distribution(t.x, t.a, t.b, params).outcomes)
      exact += params.gamma * o.probability * clipped_continuation(o.next);
    out.push_back({t, std::abs(empirical - exact), params.rho_max() / params.lambda * (1.0 + factor * kernel.w(t))});
  }
  return out;
}

struct RewardGapCheck {
  std::size_t violations = 0;
  std::size_t n = 0;
  double rate() const noexcept { return n ? static_cast<double>(violations) / static_cast<double>(n) : 0.0; }
};

/// Counts samples with |r_k - r(x_k, a_k, b_k)| > (mL + c_b) / lambda.
inline RewardGapCheck reward_gap_check(const Dataset& ds, const GameParams& params) {
  RewardGapCheck out;
  out.n = ds.size();
  const double limit = params.rho_max() / params.lambda;
  for (const auto& s : ds.samples())
    if (std::abs(s.r - expected_reward(s.x, s.a, s.b, params)) > limit) ++out.violations;
  return out;
}

}  // namespace mlspi
