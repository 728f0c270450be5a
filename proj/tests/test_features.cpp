#include <gtest/gtest.h>

#include <cmath>

#include "mlspi/mlspi.hpp"
#include "oracles.hpp"

using namespace mlspi;

namespace {

Eigen::MatrixXd random_design(CounterRng& rng, Eigen::Index n, Eigen::Index d) {
  Eigen::MatrixXd phi(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) phi(i, j) = -1.0 + 2.0 * rng.uniform();
  return phi;
}

Eigen::VectorXd random_vector(CounterRng& rng, Eigen::Index n) {
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = -5.0 + 10.0 * rng.uniform();
  return y;
}

}  // namespace

TEST(Delta, Examples) {
  EXPECT_EQ(delta({2, 1}, 1, 0, 0), 1);
  EXPECT_EQ(delta({2, 1}, 1, 0, 1), 0);
  EXPECT_EQ(delta({2, 1}, 0, 0, 0), 0);
  EXPECT_EQ(delta({2, 1}, 0, 0, 1), 1);
  EXPECT_EQ(delta({0, 0}, 1, 1, 0), 1);
  EXPECT_EQ(delta({0, 0}, 1, 1, 1), 0);
  EXPECT_THROW(delta({0, 0}, 0, 0, 2), DomainError);
}

TEST(Delta, ExactlyOneServerSelected) {
  const GameParams p{3, 2, 1, 1, 0, 0, 0.5};
  for (const State& x : enumerate_states(p))
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        int total = 0;
        for (int i = 0; i < 3; ++i) total += delta(x, a, b, i);
        EXPECT_EQ(total, 1);
      }
}

TEST(FeatureVector, Examples) {
  const GameParams p{2, 2, 1, 1, 0, 0, 0.5};
  EXPECT_EQ(feature_vector({2, 1}, 1, 0, p), (Eigen::Vector4d(9, 1, 1, 0)));
  EXPECT_EQ(feature_vector({2, 1}, 0, 0, p), (Eigen::Vector4d(4, 4, 0, 0)));
  EXPECT_EQ(feature_vector({0, 0}, 1, 1, p), (Eigen::Vector4d(1, 0, 1, 1)));
  EXPECT_THROW(feature_vector({3, 0}, 0, 0, p), DomainError);
}

TEST(FeatureVector, BoundedByCapacityPlusOneSquared) {
  // The routed coordinate may read (L + 1)^2 when the target is full.
  const GameParams p{3, 2, 1, 1, 0, 0, 0.5};
  for (const State& x : enumerate_states(p))
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const Eigen::VectorXd phi = feature_vector(x, a, b, p);
        for (int i = 0; i < p.m; ++i) {
          const double plain = static_cast<double>(x[i]) * x[i];
          EXPECT_TRUE(phi[i] == plain || phi[i] == (x[i] + 1.0) * (x[i] + 1.0));
          EXPECT_LE(phi[i], (p.L + 1.0) * (p.L + 1.0));
        }
        EXPECT_EQ(phi[p.m], a);
        EXPECT_EQ(phi[p.m + 1], b);
      }
}

TEST(FeatureVector, LinearlyIndependentOverFullEnumeration) {
  for (int m = 2; m <= 4; ++m) {
    const GameParams p{m, 2, 1, 1, 0, 0, 0.5};
    const StateSpace space(p);
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(space.size() * 4), p.feature_dim());
    Eigen::Index row = 0;
    for (const State& x : space.states())
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) phi.row(row++) = feature_vector(x, a, b, p).transpose();
    EXPECT_EQ(LeastSquares(phi).rank(), p.feature_dim());
  }
}

TEST(QHat, Examples) {
  const Eigen::Vector4d zero = Eigen::Vector4d::Zero();
  EXPECT_EQ(q_hat({2, 1}, 1, 0, zero), 0.0);
  const Eigen::Vector4d a_indicator(0, 0, 1, 0);
  EXPECT_EQ(q_hat({2, 1}, 1, 0, a_indicator), 1.0);
  EXPECT_EQ(q_hat({2, 1}, 0, 1, a_indicator), 0.0);
  EXPECT_EQ(q_hat({2, 1}, 1, 0, Eigen::Vector4d(1, 1, 0, 0)), 10.0);
  EXPECT_THROW(q_hat({2, 1}, 1, 0, Eigen::Vector3d(1, 1, 0)), DomainError);
}

TEST(SigmaNorm, Examples) {
  EXPECT_NEAR(sigma_norm(Eigen::Vector2d(3, 4)), std::sqrt(12.5), 1e-15);
  EXPECT_EQ(sigma_norm(Eigen::VectorXd::Zero(5)), 0.0);
  EXPECT_NEAR(sigma_norm(Eigen::VectorXd::Constant(7, -2.5)), 2.5, 1e-15);
  EXPECT_THROW(sigma_norm(Eigen::VectorXd()), DomainError);
}

TEST(Project, Examples) {
  Eigen::MatrixXd ones(2, 1);
  ones << 1, 1;
  EXPECT_TRUE(project(ones, Eigen::Vector2d(0, 2)).isApprox(Eigen::Vector2d(1, 1), 1e-14));
  const Eigen::Vector2d y(-3.5, 8);
  EXPECT_TRUE(project(Eigen::Matrix2d::Identity(), y).isApprox(y, 1e-14));

  CounterRng rng(3);
  const Eigen::MatrixXd phi = random_design(rng, 30, 4);
  const Eigen::VectorXd in_span = phi * Eigen::Vector4d(1, -2, 0.5, 3);
  EXPECT_LE((project(phi, in_span) - in_span).norm(), 1e-10);
}

TEST(Project, MatchesNormalEquationsAndResidualIsOrthogonal) {
  CounterRng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 1 + rng.uniform_int(6);
    const Eigen::Index n = d + rng.uniform_int(100);
    const Eigen::MatrixXd phi = random_design(rng, n, d);
    const Eigen::VectorXd y = random_vector(rng, n);
    const Eigen::VectorXd p = project(phi, y);
    EXPECT_LE((p - oracle::normal_equation_projection(phi, y)).norm(), 1e-9 * (1 + y.norm()));
    EXPECT_LE((phi.transpose() * (y - p)).cwiseAbs().maxCoeff(), 1e-9 * (1 + y.norm()));
  }
}

TEST(Project, LemmaProperties) {
  CounterRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index d = 1 + rng.uniform_int(6);
    const Eigen::Index n = 1 + rng.uniform_int(200);
    Eigen::MatrixXd phi = random_design(rng, n, d);
    if (d > 1 && trial % 3 == 0) phi.col(d - 1) = phi.col(0);  // rank deficient
    const Eigen::VectorXd y = random_vector(rng, n);
    const LeastSquares ls(phi);
    const Eigen::VectorXd py = ls.project(y);
    EXPECT_LE(sigma_norm(py), sigma_norm(y) + 1e-9);
    EXPECT_LE((ls.project(py) - py).norm() / std::sqrt(static_cast<double>(n)), 1e-9);
    const double lhs = std::pow(sigma_norm(y), 2);
    const double rhs = std::pow(sigma_norm(py), 2) + std::pow(sigma_norm(y - py), 2);
    EXPECT_NEAR(lhs, rhs, 1e-9 * (1 + lhs));
  }
}

TEST(LeastSquares, MinimumNormSolutionOnRankDeficientDesign) {
  Eigen::MatrixXd phi(3, 2);
  phi << 1, 1, 2, 2, 3, 3;
  const Eigen::Vector3d y(1, 2, 3);
  const LeastSquares ls(phi);
  EXPECT_EQ(ls.rank(), 1);
  EXPECT_TRUE(ls.solve(y).isApprox(Eigen::Vector2d(0.5, 0.5), 1e-12));
  EXPECT_THROW(ls.solve(Eigen::Vector2d(1, 2)), DomainError);
}

TEST(GramMinEig, Examples) {
  EXPECT_NEAR(gram_min_eig(Eigen::Matrix2d::Identity()), 0.5, 1e-15);

  CounterRng rng(21);
  const Eigen::MatrixXd base = random_design(rng, 40, 3);
  Eigen::MatrixXd dup(40, 4);
  dup << base, base.col(1);
  // Duplicating a column adds a zero eigenvalue and doubles the weight of
  // that direction; compare with the equivalent deduplicated design.
  Eigen::MatrixXd dedup = base;
  dedup.col(1) *= std::sqrt(2.0);
  EXPECT_NEAR(gram_min_eig(dup), gram_min_eig(dedup), 1e-10);

  EXPECT_THROW(gram_min_eig(Eigen::MatrixXd::Zero(5, 2)), DegenerateFeatures);
  EXPECT_THROW(gram_min_eig(Eigen::MatrixXd::Ones(2, 3)), InsufficientData);
}

TEST(GramMinEig, MatchesCharacteristicPolynomialRoots) {
  CounterRng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd phi = random_design(rng, 100, 4);
    const Eigen::MatrixXd gram = phi.transpose() * phi / 100.0;
    const std::vector<double> ev = oracle::symmetric_eigenvalues(gram);
    EXPECT_NEAR(gram_min_eig(phi), ev.front(), 1e-8);
  }
}
