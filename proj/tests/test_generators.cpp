#include <gtest/gtest.h>

#include "sgrl/frozen_lake.hpp"
#include "sgrl/generators.hpp"
#include "sgrl/gridworld.hpp"
#include "sgrl/selftest.hpp"

#include <set>

using namespace sgrl;

namespace {

Gridworld deterministic_gridworld() {
  GridworldConfig cfg;
  cfg.tree_regrow_prob = 0.0;
  cfg.wall_rebuild_prob = 0.0;
  return Gridworld(cfg);
}

template <class Env>
QTable<typename Env::State> quick_policy(const Env& env, Seed seed = 1) {
  TrainingConfig tc;
  tc.steps = 60'000;
  tc.epsilon_decay_steps = 30'000;
  tc.seed = seed;
  return train(env, tc);
}

template <class Env>
Trajectory<typename Env::State> walk(const Env& env, const QFunction<typename Env::State>& q,
                                     Seed seed, std::size_t len, double eps = 0.3) {
  SplitMix64 rng(seed);
  Trajectory<typename Env::State> t{env.reset(0), {}};
  auto s = t.start;
  for (std::size_t i = 0; i < len && !env.is_terminal(s); ++i) {
    const Action a = rng.uniform() < eps ? static_cast<Action>(rng.below(env.num_actions()))
                                         : greedy_action(q, s);
    const Seed ss = rng();
    auto tr = env.step(s, a, ss);
    t.steps.push_back({s, a, tr.reward, ss, tr.prob, tr.next_state});
    s = tr.next_state;
  }
  return t;
}

template <class State>
void expect_matches_oracle(const ExplanationSet<State>& set,
                           const std::vector<selftest::detail::OracleCandidate>& want) {
  ASSERT_EQ(set.candidates.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(set.candidates[i].state.key(), want[i].key);
    EXPECT_EQ(set.candidates[i].scores.objectives(), want[i].objectives);
    EXPECT_EQ(set.candidates[i].rollout.actions(), want[i].actions);
  }
}

} // namespace

TEST(AdvanceExplain, MatchesExhaustiveEnumeration) {
  for (Seed s : {1ULL, 2ULL}) {
    const auto r = selftest::check_advance_enumeration(s);
    EXPECT_TRUE(r.passed) << r.detail;
  }
}

TEST(RewindExplain, MatchesExhaustiveEnumeration) {
  const auto env = deterministic_gridworld();
  const auto q = quick_policy(env);
  const auto traj = walk(env, q, 17, 12);
  ASSERT_GE(traj.size(), 4U);
  for (std::size_t n = 2; n < traj.size(); ++n) {
    const auto factual = replay(env, traj, n);
    if (env.is_terminal(factual)) continue;
    ExplanationRequest req;
    req.factual_index = n;
    req.horizon = 2;
    req.direction = Direction::Rewind;
    req.factual_id = n;
    req.moo.seed = n;
    const auto set = rewind_explain(env, q, traj, req);
    expect_matches_oracle(set, selftest::detail::enumerated_front(env, q, factual,
                                                                  replay(env, traj, n - 2), 2));
  }
}

TEST(RewindExplain, OriginalHistoryReproducesFactualAndIsExcluded) {
  const Gridworld env;
  const auto q = quick_policy(env);
  const auto traj = walk(env, q, 5, 10);
  const std::size_t n = 6, k = 3;
  ASSERT_GE(traj.size(), n);
  const auto factual = replay(env, traj, n);
  const auto start = replay(env, traj, n - k);
  std::vector<Action> acts;
  std::vector<Seed> seeds;
  for (std::size_t i = n - k; i < n; ++i) {
    acts.push_back(traj.steps[i].action);
    seeds.push_back(traj.steps[i].step_seed);
  }
  EXPECT_EQ(execute(env, start, acts, seeds).end_state(), factual);

  ExplanationRequest req;
  req.factual_index = n;
  req.horizon = k;
  req.direction = Direction::Rewind;
  SemifactualSearch<Gridworld> search(env, q, factual, start, seeds, req);
  for (const auto& c : search.candidates_of(acts)) EXPECT_FALSE(c.state == factual);
  for (const auto& c : rewind_explain(env, q, traj, req).candidates) EXPECT_FALSE(c.state == factual);
}

TEST(RewindExplain, InsufficientHistory) {
  const FrozenLake env;
  const auto q = quick_policy(env);
  const auto traj = walk(env, q, 3, 5);
  ExplanationRequest req;
  req.factual_index = 1;
  req.horizon = 3;
  req.direction = Direction::Rewind;
  EXPECT_THROW(rewind_explain(env, q, traj, req), std::invalid_argument);
  EXPECT_THROW(explain(env, q, traj, req), std::invalid_argument);
  req.direction = Direction::Advance;
  EXPECT_THROW(rewind_explain(env, q, traj, req), std::invalid_argument);
}

TEST(Explain, CandidatesValidNondominatedAndDistinct) {
  const Gridworld gw;
  const auto q = quick_policy(gw);
  for (Seed seed = 0; seed < 4; ++seed) {
    const auto traj = walk(gw, q, seed, 10);
    for (auto dir : {Direction::Advance, Direction::Rewind}) {
      ExplanationRequest req;
      req.direction = dir;
      req.factual_index = std::min<std::size_t>(traj.size(), 5);
      req.seed = seed;
      if (gw.is_terminal(replay(gw, traj, req.factual_index))) continue;
      const auto set = explain(gw, q, traj, req);
      const auto outcome = greedy_action(q, set.factual_state);
      EXPECT_EQ(set.chosen_action, outcome);
      std::set<std::string> keys;
      for (const auto& c : set.candidates) {
        EXPECT_EQ(c.scores.validity, 1);
        EXPECT_EQ(greedy_action(q, c.state), outcome);
        EXPECT_FALSE(gw.is_terminal(c.state));
        EXPECT_GT(c.feature_gain, 0.0);
        EXPECT_EQ(c.rollout.end_state(), c.state);
        EXPECT_LE(c.rollout.size(), req.horizon);
        EXPECT_EQ(c.origin, dir);
        EXPECT_TRUE(keys.insert(c.state.key()).second);
        for (const auto& d : set.candidates) EXPECT_FALSE(scores_dominate(d.scores, c.scores));
      }
      EXPECT_GE(set.archive_size, set.candidates.size());
    }
  }
}

TEST(Explain, DeterministicGivenSeed) {
  const FrozenLake env;
  const auto q = quick_policy(env);
  const auto traj = walk(env, q, 9, 12);
  ExplanationRequest req;
  req.factual_index = 4;
  req.seed = 21;
  req.moo.seed = 22;
  for (auto dir : {Direction::Advance, Direction::Rewind}) {
    req.direction = dir;
    const auto a = explain(env, q, traj, req), b = explain(env, q, traj, req);
    ASSERT_EQ(a.candidates.size(), b.candidates.size());
    for (std::size_t i = 0; i < a.candidates.size(); ++i) {
      EXPECT_EQ(a.candidates[i].state, b.candidates[i].state);
      EXPECT_EQ(a.candidates[i].scores, b.candidates[i].scores);
      EXPECT_EQ(a.candidates[i].rollout.actions(), b.candidates[i].rollout.actions());
    }
  }
}

TEST(Explain, TerminalFactualRejected) {
  const FrozenLake env;
  Trajectory<FrozenLakeState> t{{{4, 4}, false}, {}};
  auto tr = env.step(t.start, FrozenLake::kExit, 0);
  t.steps.push_back({t.start, FrozenLake::kExit, tr.reward, 0, tr.prob, tr.next_state});
  ExplanationRequest req;
  req.factual_index = 1;
  const auto q = quick_policy(env);
  EXPECT_THROW(advance_explain(env, q, t, req), std::invalid_argument);
}

TEST(SelectPresentation, DeterministicAndInRange) {
  const Gridworld gw;
  const auto q = quick_policy(gw);
  const auto traj = walk(gw, q, 2, 8);
  ExplanationRequest req;
  req.factual_index = 3;
  const auto set = explain(gw, q, traj, req);
  ASSERT_FALSE(set.empty());
  for (Seed s = 0; s < 20; ++s) {
    const auto& a = select_presentation(set, s);
    const auto& b = select_presentation(set, s);
    EXPECT_EQ(&a, &b);
  }
  ExplanationSet<GridworldState> empty;
  EXPECT_THROW(select_presentation(empty, 0), std::invalid_argument);
}

TEST(ParetoFront, KeepsOnlyNondominated) {
  using C = SemifactualCandidate<FrozenLakeState>;
  auto cand = [](int col, std::array<double, 4> o) {
    C c;
    c.state = {{0, col}, false};
    c.scores = {1, o[0], o[1], o[2], o[3]};
    return c;
  };
  std::vector<C> pool{cand(1, {1, 1, 1, 1}), cand(2, {0.5, 1, 1, 1}), cand(3, {1, 0.5, 1, 1}),
                      cand(4, {1, 1, 1, 1})};
  auto front = pareto_front(pool);
  ASSERT_EQ(front.size(), 2U);
  EXPECT_EQ(front[0].state.agent.col, 2);
  EXPECT_EQ(front[1].state.agent.col, 3);
}
