#include <gtest/gtest.h>

#include "sgrl/frozen_lake.hpp"
#include "sgrl/gridworld.hpp"
#include "sgrl/policy.hpp"

#include <cmath>
#include <sstream>

using namespace sgrl;

TEST(Softmax, ClosedFormTwoActions) {
  const std::vector<double> q{1.0, 0.0};
  auto p = softmax(q);
  const double e = std::exp(1.0);
  EXPECT_NEAR(p[0], e / (e + 1.0), 1e-15);
  EXPECT_NEAR(p[1], 1.0 / (e + 1.0), 1e-15);
  EXPECT_NEAR(p[0], 0.73106, 1e-5);
  EXPECT_NEAR(p[1], 0.26894, 1e-5);
}

TEST(Softmax, UniformOverSix) {
  auto p = softmax(std::vector<double>(6, 3.5));
  for (double v : p) EXPECT_NEAR(v, 1.0 / 6.0, 1e-15);
}

TEST(Softmax, ShiftInvariantAndStable) {
  SplitMix64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> q(1 + rng.below(6));
    const double scale = std::pow(10.0, double(rng.below(7)));
    for (auto& v : q) v = scale * (2.0 * rng.uniform() - 1.0);
    auto p = softmax(q);
    double sum = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      EXPECT_TRUE(std::isfinite(v));
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    auto shifted = q;
    for (auto& v : shifted) v += 17.25;
    auto ps = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(ps[i], p[i], 1e-12);
  }
}

TEST(Softmax, EmptyThrows) { EXPECT_THROW(softmax(std::vector<double>{}), std::invalid_argument); }

TEST(GreedyAction, ExamplesAndTies) {
  EXPECT_EQ(argmax_action(std::vector<double>{0, 1, 0, 0, 0, 0}), 1);
  EXPECT_EQ(argmax_action(std::vector<double>(6, 0.0)), 0);
  EXPECT_EQ(argmax_action(std::vector<double>{-1, 2, 2}), 1);
}

TEST(GreedyAction, InvariantUnderShiftAndPositiveScale) {
  SplitMix64 rng(9);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> q(6);
    for (auto& v : q) v = double(rng.below(4)) - 2.0;  // ties are common
    const auto a = argmax_action(q);
    auto scaled = q, shifted = q;
    for (auto& v : scaled) v *= 3.0;
    for (auto& v : shifted) v += 5.0;
    EXPECT_EQ(argmax_action(scaled), a);
    EXPECT_EQ(argmax_action(shifted), a);
  }
}

TEST(QTable, UnseenStatesReadZero) {
  QTable<FrozenLakeState> q(5);
  EXPECT_EQ(q.q_values({{3, 3}, false}), std::vector<double>(5, 0.0));
  q.row({{3, 3}, false})[2] = 1.5;
  EXPECT_EQ(greedy_action(q, FrozenLakeState{{3, 3}, false}), 2);
  EXPECT_EQ(q.size(), 1U);
  EXPECT_THROW(q.set("x", {1.0}), std::invalid_argument);
}

TEST(Train, ZeroStepsGivesEmptyTable) {
  TrainingConfig tc;
  tc.steps = 0;
  auto q = train(Gridworld{}, tc);
  EXPECT_EQ(q.size(), 0U);
  EXPECT_EQ(q.q_values(Gridworld{}.reset(0)), std::vector<double>(6, 0.0));
}

TEST(Train, SameSeedIdenticalTables) {
  TrainingConfig tc;
  tc.steps = 20'000;
  tc.seed = 42;
  EXPECT_EQ(train(Gridworld{}, tc), train(Gridworld{}, tc));
  tc.seed = 43;
  auto other = train(Gridworld{}, tc);
  tc.seed = 42;
  EXPECT_FALSE(other == train(Gridworld{}, tc));
}

TEST(Train, InvalidConfigRejected) {
  TrainingConfig tc;
  tc.learning_rate = 0.0;
  EXPECT_THROW(train(FrozenLake{}, tc), std::invalid_argument);
  tc = {};
  tc.discount = 1.5;
  EXPECT_THROW(train(FrozenLake{}, tc), std::invalid_argument);
}

TEST(Train, FrozenLakeGreedyReachesGoal) {
  FrozenLake env;
  TrainingConfig tc;
  tc.steps = 200'000;
  tc.epsilon_decay_steps = 100'000;
  tc.seed = 1;
  const auto q = train(env, tc);
  int reached = 0;
  for (std::uint64_t ep = 0; ep < 100; ++ep) {
    auto s = env.reset(ep);
    for (std::uint64_t t = 0; t < 50 && !s.done; ++t)
      s = env.step(s, greedy_action(q, s), derive_seed({77, ep, t})).next_state;
    reached += s.done ? 1 : 0;
  }
  EXPECT_GE(reached, 90);
}

TEST(QTableIo, RoundTripIsExact) {
  TrainingConfig tc;
  tc.steps = 5'000;
  auto q = train(FrozenLake{}, tc);
  std::stringstream ss;
  write_qtable(ss, q);
  auto back = read_qtable<FrozenLakeState>(ss);
  EXPECT_EQ(back, q);
}

TEST(QTableIo, RejectsGarbage) {
  std::stringstream bad("not a table\n");
  EXPECT_THROW(read_qtable<FrozenLakeState>(bad), std::runtime_error);
  std::stringstream shortline("qtable 3\nf0,0;0 1 2\n");
  EXPECT_THROW(read_qtable<FrozenLakeState>(shortline), std::runtime_error);
}
