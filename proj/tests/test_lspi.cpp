#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "mlspi/mlspi.hpp"

using namespace mlspi;

namespace {

const GameParams kP22{2, 2, 1.0, 1.0, 2.0, 1.0, 0.8};

double binomial_se(double p, int n) { return std::sqrt(p * (1 - p) / n); }

}  // namespace

TEST(EpsilonGreedy, Examples) {
  CounterRng rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(epsilon_greedy({0.0, 1.0}, 0.0, rng), 1);

  constexpr int kDraws = 100000;
  int ones = 0;
  for (int i = 0; i < kDraws; ++i) ones += epsilon_greedy({1.0, 0.0}, 1.0, rng);
  EXPECT_NEAR(static_cast<double>(ones) / kDraws, 0.5, 3 * binomial_se(0.5, kDraws));

  int zeros = 0;
  for (int i = 0; i < kDraws; ++i) zeros += epsilon_greedy({0.0, 1.0}, 0.2, rng) == 0;
  EXPECT_NEAR(static_cast<double>(zeros) / kDraws, 0.1, 3 * binomial_se(0.1, kDraws));

  EXPECT_THROW(epsilon_greedy({1.0, 0.0}, 1.5, rng), DomainError);
}

TEST(ExplorationSchedule, DecaysToFloor) {
  const ExplorationSchedule s;
  EXPECT_EQ(s.at(0), 1.0);
  EXPECT_NEAR(s.at(10), std::pow(0.999, 10), 1e-15);
  EXPECT_EQ(s.at(1000000), 0.05);
  EXPECT_THROW((ExplorationSchedule{0.1, 0.2, 0.9}.validate()), DomainError);
  EXPECT_THROW((ExplorationSchedule{1.0, 0.0, 0.0}.validate()), DomainError);
  EXPECT_THROW((ExplorationSchedule{1.0, 0.0, 1.5}.validate()), DomainError);
}

TEST(ImprovePolicy, Examples) {
  const StateSpace space(kP22);
  EXPECT_EQ(improve_policy(Eigen::Vector4d::Zero(), space), MixedPolicy::pure(space, 0));
  EXPECT_EQ(improve_policy(Eigen::Vector4d(0, 0, 0, 1), space), MixedPolicy::pure(space, 0));

  const MixedPolicy beta = improve_policy(Eigen::Vector4d(1, -1, -1, 2), space);
  const ActionDist& d = beta({1, 0});
  EXPECT_NEAR(d[0], 0.25, 1e-12);
  EXPECT_NEAR(d[1], 0.75, 1e-12);
}

TEST(ImprovePolicy, MixNoWorseThanAnyPureDefense) {
  const StateSpace space(GameParams{3, 2, 1, 1, 0, 0, 0.5});
  CounterRng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd theta(5);
    for (auto& v : theta) v = -2 + 4 * rng.uniform();
    const MixedPolicy beta = improve_policy(theta, space);
    for (std::size_t s = 0; s < space.size(); ++s) {
      const State x = space.state(s);
      const ActionDist& d = beta.at(s);
      const double mixed = std::max(d[0] * q_hat(x, 0, 0, theta) + d[1] * q_hat(x, 0, 1, theta),
                                    d[0] * q_hat(x, 1, 0, theta) + d[1] * q_hat(x, 1, 1, theta));
      for (int b = 0; b < 2; ++b)
        EXPECT_LE(mixed, std::max(q_hat(x, 0, b, theta), q_hat(x, 1, b, theta)) + 1e-10);
    }
  }
}

TEST(Collect, SingleSampleStartsFromInitialDistribution) {
  const Attacker attacker(RandomUniformAttacker{}, kP22);
  CounterRng rng(3);
  const Rollout r = collect(MixedPolicy::uniform(StateSpace(kP22)), attacker, 1, ExplorationSchedule{}, kP22, rng,
                            InitialDistribution::at({2, 1}));
  ASSERT_EQ(r.data.size(), 1u);
  EXPECT_EQ(r.data[0].x, (State{2, 1}));
  EXPECT_EQ(r.final_state, r.data[0].x_next);
  EXPECT_TRUE(r.data.frozen());
  EXPECT_THROW(collect(MixedPolicy::uniform(StateSpace(kP22)), attacker, 0, ExplorationSchedule{}, kP22, rng,
                       InitialDistribution::uniform()),
               DomainError);
}

TEST(Collect, UniformJointActions) {
  const Attacker attacker(RandomUniformAttacker{}, kP22);
  CounterRng rng(4);
  constexpr int kSteps = 100000;
  const Rollout r = collect(MixedPolicy::pure(StateSpace(kP22), 1), attacker, kSteps, ExplorationSchedule::constant(1.0),
                            kP22, rng, InitialDistribution::empty_system(kP22));
  std::map<std::pair<int, int>, int> freq;
  for (const Sample& s : r.data.samples()) ++freq[{s.a, s.b}];
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      EXPECT_NEAR(static_cast<double>(freq[{a, b}]) / kSteps, 0.25, 3 * binomial_se(0.25, kSteps));
}

TEST(Collect, TrajectoryIsChained) {
  const Attacker attacker(RandomUniformAttacker{}, kP22);
  CounterRng rng(5);
  const Rollout r = collect(MixedPolicy::uniform(StateSpace(kP22)), attacker, 500, ExplorationSchedule{}, kP22, rng,
                            InitialDistribution::empty_system(kP22));
  for (std::size_t k = 1; k < r.data.size(); ++k) EXPECT_EQ(r.data[k].x, r.data[k - 1].x_next);
}

TEST(Collect, SameSeedSameDataset) {
  const Attacker attacker(RandomUniformAttacker{}, kP22);
  CounterRng a(6), b(6);
  const MixedPolicy beta = MixedPolicy::uniform(StateSpace(kP22));
  const Rollout ra = collect(beta, attacker, 2000, ExplorationSchedule{}, kP22, a, InitialDistribution::uniform());
  const Rollout rb = collect(beta, attacker, 2000, ExplorationSchedule{}, kP22, b, InitialDistribution::uniform());
  EXPECT_EQ(ra.data.samples(), rb.data.samples());
}

TEST(CollectExhaustive, VisitsEveryTriple) {
  CounterRng rng(7);
  const Dataset ds = collect_exhaustive(kP22, 3, rng);
  EXPECT_EQ(ds.size(), 9u * 4u * 3u);
  EXPECT_EQ(ds.counts().size(), 36u);
  for (const auto& [t, c] : ds.counts()) EXPECT_EQ(c, 3u);
}

TEST(Train, UndiscountedFullExplorationRecoversRewardRegression) {
  TrainConfig cfg;
  cfg.params = {2, 2, 1.0, 1.0, 2.0, 1.0, 0.0};
  cfg.n = 20000;
  cfg.exploration = ExplorationSchedule::constant(1.0);
  cfg.theta_tol = 0.05;
  cfg.seed = 8;
  const TrainReport r = train(cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.theta_trace.size(), 2u);

  const Eigen::MatrixXd phi = feature_matrix(r.last_dataset);
  Eigen::VectorXd rewards(phi.rows());
  for (std::size_t k = 0; k < r.last_dataset.size(); ++k) rewards[static_cast<Eigen::Index>(k)] = r.last_dataset[k].r;
  EXPECT_LE((phi * r.theta_trace.back() - project(phi, rewards)).norm(), 1e-9);
  EXPECT_EQ(*r.beta_final, improve_policy(r.theta_trace.back(), StateSpace(cfg.params)));

  const ShapleyResult exact = shapley_value_iteration(cfg.params);
  for (std::size_t s = 0; s < exact.v.size(); ++s) {
    const Matrix2x2 g = exact.q.matrix(s);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        const bool strict = g[ua][ub] > g[1 - ua][ub] && g[ua][ub] < g[ua][1 - ub];
        if (strict) EXPECT_EQ(r.beta_final->at(s)[ub], 1.0) << to_string(exact.q.space().state(s));
      }
  }
}

TEST(Train, HugeToleranceStopsAfterFirstIteration) {
  TrainConfig cfg;
  cfg.params = kP22;
  cfg.n = 300;
  cfg.theta_tol = 1e6;
  const TrainReport r = train(cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.theta_trace.size(), 1u);
  EXPECT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].dataset_size, 300u);
}

TEST(Train, DeterministicForSeed) {
  TrainConfig cfg;
  cfg.params = kP22;
  cfg.n = 400;
  cfg.max_outer_iters = 4;
  cfg.seed = 11;
  cfg.attacker = BestResponderAttacker{};
  const TrainReport a = train(cfg), b = train(cfg);
  ASSERT_EQ(a.theta_trace.size(), b.theta_trace.size());
  for (std::size_t k = 0; k < a.theta_trace.size(); ++k) EXPECT_EQ(a.theta_trace[k], b.theta_trace[k]);
  EXPECT_EQ(*a.beta_final, *b.beta_final);
  cfg.seed = 12;
  EXPECT_NE(train(cfg).theta_trace.front(), a.theta_trace.front());
}

TEST(Train, TraceBoundedByIterationLimit) {
  TrainConfig cfg;
  cfg.params = kP22;
  cfg.n = 200;
  cfg.max_outer_iters = 3;
  cfg.theta_tol = 1e-12;
  cfg.attacker = MirrorLearnerAttacker{};
  const TrainReport r = train(cfg);
  EXPECT_EQ(r.theta_trace.size(), 3u);
  EXPECT_FALSE(r.converged);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(r.diagnostics[k].iteration, k);
}

TEST(Train, ValidatesConfig) {
  TrainConfig cfg;
  cfg.params = kP22;
  cfg.n = 4;
  EXPECT_THROW(train(cfg), DomainError);
  cfg.n = 100;
  cfg.theta_tol = 0.0;
  EXPECT_THROW(train(cfg), DomainError);
  cfg.theta_tol = 1e-3;
  cfg.x0 = State{3, 0};
  EXPECT_THROW(train(cfg), DomainError);
}

TEST(Train, DivergenceCarriesPartialReport) {
  TrainConfig cfg;
  cfg.params = kP22;
  cfg.n = 200;
  cfg.inner.divergence_norm = 1e-9;
  try {
    train(cfg);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.iteration(), 0u);
    EXPECT_TRUE(e.partial().theta_trace.empty());
  }
}

TEST(Train, LimsupRelationOnSmallGame) {
  const GameParams p{2, 1, 1.0, 1.0, 1.0, 0.5, 0.6};
  const TabularGame game(p);
  const ShapleyResult mpe = shapley_value_iteration(game);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TrainConfig cfg;
    cfg.params = p;
    cfg.n = 2000;
    cfg.max_outer_iters = 8;
    cfg.seed = seed;
    cfg.attacker = BestResponderAttacker{};
    const TrainReport r = train(cfg);
    const QTable truth = defender_q(*r.beta_evaluated, game);
    double eps_hat = 0.0, gap = 0.0;
    for (const auto& [t, c] : r.last_dataset.counts()) {
      const double fitted = q_hat(t.x, t.a, t.b, r.theta_trace.back());
      eps_hat = std::max(eps_hat, std::abs(truth.at(t.x, t.a, t.b) - fitted));
      gap = std::max(gap, std::abs(mpe.q.at(t.x, t.a, t.b) - fitted));
    }
    EXPECT_LE(gap, 2 * p.gamma * eps_hat / std::pow(1 - p.gamma, 2) * 1.05);
  }
}

TEST(Attacker, BestResponderTracksAnnouncedMix) {
  const StateSpace space(kP22);
  Attacker attacker(BestResponderAttacker{false}, kP22);
  CounterRng rng(13);
  EXPECT_THROW(attacker.act({0, 0}, 0.0, rng), std::logic_error);
  attacker.prepare(MixedPolicy::pure(space, 1));
  ASSERT_TRUE(attacker.policy().has_value());
  EXPECT_EQ(*attacker.policy(), best_response_value(MixedPolicy::pure(space, 1), kP22).policy);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(attacker.act({1, 1}, 1.0, rng), 0);
  EXPECT_EQ(attacker_name(attacker.spec()), "best_responder");
}

TEST(Attacker, FixedMixedMustMatchStateSpace) {
  EXPECT_THROW(Attacker(FixedMixedAttacker{MixedPolicy::uniform(StateSpace(2, 1))}, kP22), DomainError);
}

TEST(HorizonForTruncation, SmallestSufficientHorizon) {
  const std::size_t h = horizon_for_truncation(kP22, 1e-3);
  EXPECT_LT(std::pow(kP22.gamma, static_cast<double>(h)) * kP22.q_max(), 1e-3);
  EXPECT_GE(std::pow(kP22.gamma, static_cast<double>(h - 1)) * kP22.q_max(), 1e-3);
  GameParams p = kP22;
  p.gamma = 0.0;
  EXPECT_EQ(horizon_for_truncation(p, 1e-3), 1u);
  EXPECT_THROW(horizon_for_truncation(kP22, 0.0), DomainError);
}

TEST(RolloutEvaluation, SingleStepIsImmediateReward) {
  GameParams p = kP22;
  p.gamma = 0.0;
  const StateSpace space(p);
  const Attacker attacker(FixedMixedAttacker{MixedPolicy::uniform(space)}, p);
  const RolloutEstimate est = evaluate_policy_rollout(MixedPolicy::uniform(space), attacker, 1, 100000, p,
                                                      CounterRng(14), InitialDistribution::at({2, 1}));
  double expected = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) expected += 0.25 * expected_reward({2, 1}, a, b, p);
  EXPECT_NEAR(est.mean, expected, 3 * est.standard_error);
}

TEST(RolloutEvaluation, MatchesExactValueAgainstFixedAttacker) {
  const GameParams p{2, 1, 1.0, 1.0, 2.0, 1.0, 0.7};
  const StateSpace space(p);
  CounterRng rng(15);
  std::vector<ActionDist> a_mix(space.size()), b_mix(space.size());
  for (std::size_t s = 0; s < space.size(); ++s) {
    const double u = rng.uniform(), w = rng.uniform();
    a_mix[s] = {u, 1 - u};
    b_mix[s] = {w, 1 - w};
  }
  const MixedPolicy alpha(space, a_mix), beta(space, b_mix);
  const Attacker attacker(FixedMixedAttacker{alpha}, p);
  const std::vector<double> exact = state_values(policy_value(alpha, beta, p), alpha, beta);
  const std::size_t horizon = horizon_for_truncation(p, 1e-4);
  for (const State& x0 : space.states()) {
    const RolloutEstimate est =
        evaluate_policy_rollout(beta, attacker, horizon, 20000, p, CounterRng(16), InitialDistribution::at(x0));
    EXPECT_NEAR(est.mean, exact[space.index(x0)], 3 * est.standard_error + 1e-4);
  }
}

TEST(RolloutEvaluation, StandardErrorShrinksWithRollouts) {
  const StateSpace space(kP22);
  const Attacker attacker(RandomUniformAttacker{}, kP22);
  const std::size_t horizon = horizon_for_truncation(kP22, 1e-2);
  const RolloutEstimate small = evaluate_policy_rollout(MixedPolicy::uniform(space), attacker, horizon, 4000, kP22,
                                                        CounterRng(17), InitialDistribution::empty_system(kP22));
  const RolloutEstimate large = evaluate_policy_rollout(MixedPolicy::uniform(space), attacker, horizon, 8000, kP22,
                                                        CounterRng(17), InitialDistribution::empty_system(kP22));
  EXPECT_NEAR(large.standard_error / small.standard_error, 1 / std::sqrt(2.0), 0.05);
  EXPECT_THROW(evaluate_policy_rollout(MixedPolicy::uniform(space), attacker, horizon, 0, kP22, CounterRng(1),
                                       InitialDistribution::uniform()),
               DomainError);
}
