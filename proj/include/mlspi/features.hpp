#pragma once

// Linear architecture q(x, a, b; theta) = phi(x, a, b) . theta with
// d = m + 2 features: squared post-routing queue lengths, then a, then b.
// Also the sample-space geometry used by evaluation and the error bound:
// sigma-norm, orthogonal projection onto span(Phi), Gram spectrum.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "mlspi/errors.hpp"
#include "mlspi/game_model.hpp"

namespace mlspi {

using WeightVector = Eigen::VectorXd;

/// Eigenvalues of the Gram matrix at or below this fraction of the largest
/// are treated as zero. Singular values are cut at its square root.
inline constexpr double kRankTolerance = 1e-10;

/// Indicator of the server receiving the next arrival under (a, b), with
/// ties going to the lowest index. `i` is zero-based.
inline int delta(const State& x, int a, int b, int i) {
  if (i < 0 || i >= x.size())
    throw DomainError("delta: server index " + std::to_string(i) + " out of range");
  validate_action(a);
  validate_action(b);
  const auto& q = x.values();
  const bool attacked = (a == 1 && b == 0);
  const auto it = attacked ? std::max_element(q.begin(), q.end()) : std::min_element(q.begin(), q.end());
  return static_cast<int>(it - q.begin()) == i ? 1 : 0;
}

inline Eigen::VectorXd feature_vector(const State& x, int a, int b) {
  validate_action(a);
  validate_action(b);
  const int m = x.size();
  const auto& q = x.values();
  const bool attacked = (a == 1 && b == 0);
  const auto target = static_cast<int>(
      (attacked ? std::max_element(q.begin(), q.end()) : std::min_element(q.begin(), q.end())) -
      q.begin());
  Eigen::VectorXd phi(m + 2);
  for (int i = 0; i < m; ++i) {
    const double shifted = x[i] + (i == target ? 1 : 0);
    phi[i] = shifted * shifted;
  }
  phi[m] = a;
  phi[m + 1] = b;
  return phi;
}

inline Eigen::VectorXd feature_vector(const State& x, int a, int b, const GameParams& params) {
  validate_state(x, params);
  return feature_vector(x, a, b);
}

inline double q_hat(const State& x, int a, int b, const WeightVector& theta) {
  if (theta.size() != x.size() + 2)
    throw DomainError("q_hat: theta has length " + std::to_string(theta.size()) + ", expected " +
                      std::to_string(x.size() + 2));
  return feature_vector(x, a, b).dot(theta);
}

/// sqrt(mean(y^2)).
inline double sigma_norm(const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (y.size() == 0) throw DomainError("sigma_norm of an empty vector");
  return std::sqrt(y.squaredNorm() / static_cast<double>(y.size()));
}

/// Minimum-norm least squares against a fixed design matrix. Factor once,
/// then solve or project any number of right-hand sides.
class LeastSquares {
 public:
  explicit LeastSquares(const Eigen::MatrixXd& phi) : rows_(phi.rows()), cols_(phi.cols()) {
    if (phi.rows() == 0 || phi.cols() == 0) throw DomainError("LeastSquares: empty design");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double cutoff = s.size() > 0 ? s[0] * std::sqrt(kRankTolerance) : 0.0;
    rank_ = 0;
    while (rank_ < s.size() && s[rank_] > cutoff && s[rank_] > 0.0) ++rank_;
    basis_ = svd.matrixU().leftCols(rank_);
    pinv_ = svd.matrixV().leftCols(rank_) * s.head(rank_).cwiseInverse().asDiagonal() *
            basis_.transpose();
  }

  Eigen::Index rows() const noexcept { return rows_; }
  Eigen::Index cols() const noexcept { return cols_; }
  Eigen::Index rank() const noexcept { return rank_; }

  /// theta = Phi^+ y.
  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& y) const {
    check(y);
    return pinv_ * y;
  }

  /// Phi Phi^+ y.
  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& y) const {
    check(y);
    return basis_ * (basis_.transpose() * y);
  }

  const Eigen::MatrixXd& pseudoinverse() const noexcept { return pinv_; }

 private:
  void check(const Eigen::Ref<const Eigen::VectorXd>& y) const {
    if (y.size() != rows_)
      throw DomainError("LeastSquares: right-hand side has " + std::to_string(y.size()) +
                        " entries, design has " + std::to_string(rows_) + " rows");
  }

  Eigen::Index rows_;
  Eigen::Index cols_;
  Eigen::Index rank_ = 0;
  Eigen::MatrixXd basis_;  // orthonormal basis of span(Phi)
  Eigen::MatrixXd pinv_;
};

/// Orthogonal projection of y onto the column space of phi.
inline Eigen::VectorXd project(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y) {
  return LeastSquares(phi).project(y);
}

/// Smallest strictly positive eigenvalue of phi^T phi / n.
inline double gram_min_eig(const Eigen::MatrixXd& phi) {
  if (phi.rows() < phi.cols())
    throw InsufficientData("gram_min_eig: need at least as many rows as columns");
  const Eigen::MatrixXd gram = phi.transpose() * phi / static_cast<double>(phi.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = eig.eigenvalues();  // ascending
  const double largest = ev[ev.size() - 1];
  if (!(largest > 0.0)) throw DegenerateFeatures("Gram matrix is numerically zero");
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > kRankTolerance * largest) return ev[i];
  throw DegenerateFeatures("Gram matrix has no strictly positive eigenvalue");
}

}  // namespace mlspi
