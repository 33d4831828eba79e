#include <gtest/gtest.h>

#include "sgrl/baseline.hpp"
#include "sgrl/frozen_lake.hpp"
#include "sgrl/gridworld.hpp"

#include <deque>
#include <map>
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
QTable<typename Env::State> quick_policy(const Env& env) {
  TrainingConfig tc;
  tc.steps = 60'000;
  tc.epsilon_decay_steps = 30'000;
  tc.seed = 4;
  return train(env, tc);
}

// Shortest action distance between states in a deterministic environment.
template <class Env>
std::map<std::string, std::pair<typename Env::State, std::size_t>> bfs_distances(
    const Env& env, const typename Env::State& from, std::size_t max_depth) {
  std::map<std::string, std::pair<typename Env::State, std::size_t>> dist{{from.key(), {from, 0}}};
  std::deque<typename Env::State> frontier{from};
  while (!frontier.empty()) {
    auto s = frontier.front();
    frontier.pop_front();
    const auto d = dist.at(s.key()).second;
    if (d == max_depth || env.is_terminal(s)) continue;
    for (Action a = 0; a < env.num_actions(); ++a) {
      auto next = env.step(s, a, 0).next_state;
      if (dist.emplace(next.key(), std::pair{next, d + 1}).second) frontier.push_back(next);
    }
  }
  return dist;
}

} // namespace

TEST(SgenExplain, ReturnsAtMostDValidDistinctStates) {
  const Gridworld gw;
  const auto q = quick_policy(gw);
  const auto factual = gw.reset(0);
  for (std::size_t d : {1U, 3U, 5U}) {
    BaselineConfig cfg;
    cfg.diversity_count = d;
    cfg.seed = d;
    auto res = sgen_explain(gw, q, factual, cfg);
    EXPECT_LE(res.states.size(), d);
    EXPECT_FALSE(res.states.empty());
    std::set<std::string> keys;
    for (std::size_t i = 0; i < res.states.size(); ++i) {
      const auto& s = res.states[i];
      EXPECT_EQ(greedy_action(q, s), greedy_action(q, factual));
      EXPECT_TRUE(gw.decode_features(gw.encode_features(s)).has_value());
      EXPECT_GT(res.gains[i], 0.0);
      EXPECT_DOUBLE_EQ(res.gains[i], gain(gw.encode_features(factual), gw.encode_features(s)));
      EXPECT_GE(res.robustness[i], 0.0);
      EXPECT_LE(res.robustness[i], 1.0);
      EXPECT_TRUE(keys.insert(s.key()).second);
    }
    EXPECT_LE(res.evaluations, cfg.budget);
  }
}

TEST(SgenExplain, SingleStateHasZeroPairwiseDiversity) {
  const FrozenLake fl;
  const auto q = quick_policy(fl);
  BaselineConfig cfg;
  auto res = sgen_explain(fl, q, FrozenLakeState{{1, 0}, false}, cfg);
  ASSERT_EQ(res.states.size(), 1U);
  std::vector<FeatureVector> xs{fl.encode_features(res.states[0])};
  EXPECT_EQ(pairwise_diversity(xs), 0.0);
}

TEST(SgenExplain, DeterministicGivenSeed) {
  const Gridworld gw;
  const auto q = quick_policy(gw);
  BaselineConfig cfg;
  cfg.diversity_count = 3;
  cfg.seed = 99;
  auto a = sgen_explain(gw, q, gw.reset(0), cfg), b = sgen_explain(gw, q, gw.reset(0), cfg);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.gains, b.gains);
}

TEST(SgenExplain, NoValidStateGivesEmptyResult) {
  const FrozenLake fl;
  // Action EXIT is greedy only at (0,0).
  LambdaQFunction<FrozenLakeState, std::vector<double> (*)(const FrozenLakeState&)> q(
      5, [](const FrozenLakeState& s) {
        std::vector<double> v(5, 0.0);
        v[s.agent == Cell{0, 0} ? 4 : 0] = 1.0;
        return v;
      });
  auto res = sgen_explain(fl, q, FrozenLakeState{{0, 0}, false}, BaselineConfig{});
  EXPECT_TRUE(res.empty());
}

TEST(Robustness, FractionOfUnitNeighbours) {
  const FrozenLake fl;
  LambdaQFunction<FrozenLakeState, std::vector<double> (*)(const FrozenLakeState&)> q(
      5, [](const FrozenLakeState& s) {
        std::vector<double> v(5, 0.0);
        v[s.agent.row == 0 ? 1 : 0] = 1.0;
        return v;
      });
  // (1,2): neighbours (0,2) (2,2) (1,1) (1,3); only (0,2) differs.
  EXPECT_DOUBLE_EQ(robustness(fl, q, FeatureVector{1, 2}, Action{0}), 0.75);
  // Corner (0,0): neighbours (1,0) and (0,1).
  EXPECT_DOUBLE_EQ(robustness(fl, q, FeatureVector{0, 0}, Action{1}), 0.5);
}

TEST(SelectDiverse, NoSingleSwapImproves) {
  SplitMix64 rng(7);
  for (int t = 0; t < 200; ++t) {
    std::vector<FeatureVector> pool(2 + rng.below(12));
    for (auto& x : pool) x = {double(rng.below(6)), double(rng.below(6))};
    const std::size_t count = 1 + rng.below(5);
    const auto chosen = select_diverse(pool, count);
    ASSERT_EQ(chosen.size(), std::min(count, pool.size()));
    EXPECT_EQ(chosen.size(), std::set<std::size_t>(chosen.begin(), chosen.end()).size());
    if (chosen.size() < 2) continue;
    auto min_pair = [&](const std::vector<std::size_t>& idx) {
      double m = 1e300;
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = i + 1; j < idx.size(); ++j) m = std::min(m, gain(pool[idx[i]], pool[idx[j]]));
      return m;
    };
    const double current = min_pair(chosen);
    const std::set<std::size_t> in(chosen.begin(), chosen.end());
    for (std::size_t i = 0; i < chosen.size(); ++i)
      for (std::size_t c = 0; c < pool.size(); ++c) {
        if (in.contains(c)) continue;
        auto trial = chosen;
        trial[i] = c;
        EXPECT_LE(min_pair(trial), current);
      }
  }
}

TEST(SelectDiverse, Edges) {
  EXPECT_TRUE(select_diverse({}, 3).empty());
  std::vector<FeatureVector> pool{{0, 0}, {1, 1}};
  EXPECT_EQ(select_diverse(pool, 1), (std::vector<std::size_t>{0}));
  EXPECT_EQ(select_diverse(pool, 5).size(), 2U);
}

TEST(FindActionPath, OneStepTargetsMatchBfs) {
  const auto gw = deterministic_gridworld();
  const auto start = GridworldState{{3, 2}, {4, 4}, 0xF, false};
  const auto dist = bfs_distances(gw, start, 1);
  std::size_t checked = 0;
  for (Action a = 0; a < 6; ++a) {
    const auto target = gw.step(start, a, 0).next_state;
    if (target == start || target.done) continue;
    ASSERT_EQ(dist.at(target.key()).second, 1U);
    auto path = find_action_path(gw, start, target, 6, 600, a);
    ASSERT_TRUE(path.has_value());
    EXPECT_EQ(path->size(), 1U);
    EXPECT_EQ(path->end_state(), target);
    ++checked;
  }
  EXPECT_GE(checked, 3U);
}

TEST(FindActionPath, NeverShorterThanBfsAndAlwaysExact) {
  const auto gw = deterministic_gridworld();
  const auto start = gw.reset(0);
  const auto dist = bfs_distances(gw, start, 3);
  std::size_t found = 0;
  Seed seed = 0;
  for (const auto& [key, entry] : dist) {
    const auto& [target, d] = entry;
    if (d == 0 || target.done) continue;
    auto path = find_action_path(gw, start, target, 6, 600, ++seed);
    if (!path) continue;
    ++found;
    EXPECT_GE(path->size(), d);
    EXPECT_EQ(path->end_state(), target);
  }
  EXPECT_GT(found, 0U);
}

TEST(FindActionPath, TargetEqualsStartIsAbsent) {
  const Gridworld gw;
  EXPECT_FALSE(find_action_path(gw, gw.reset(0), gw.reset(0), 6, 600, 1).has_value());
  EXPECT_THROW(find_action_path(gw, gw.reset(0), gw.reset(0), 0, 600, 1), std::invalid_argument);
}

TEST(ScoreBaseline, PathScoresAndWorstCase) {
  const auto gw = deterministic_gridworld();
  const auto q = quick_policy(gw);
  const auto factual = gw.reset(0);
  BaselineResult<GridworldState> res;
  const auto one = gw.step(factual, Gridworld::kRight, 0).next_state;
  res.states = {one, GridworldState{{2, 2}, {4, 4}, 0xF, false}};
  res.gains = {1.0, 2.0};
  res.robustness = {1.0, 1.0};
  res.paths = {execute(gw, factual, std::vector<Action>{Gridworld::kRight}, std::vector<Seed>{0}),
               std::nullopt};
  auto scores = score_baseline(gw, q, factual, res, 3, 20, 5);
  ASSERT_EQ(scores.size(), 2U);
  EXPECT_TRUE(scores[0].path_found);
  EXPECT_DOUBLE_EQ(scores[0].scores.temporal_distance, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(scores[0].scores.fidelity, fidelity(q, *res.paths[0]));
  EXPECT_EQ(scores[0].scores.exceptionality, 1.0);
  EXPECT_FALSE(scores[1].path_found);
  EXPECT_EQ(scores[1].scores.temporal_distance, 1.0);
  EXPECT_EQ(scores[1].scores.stochastic_uncertainty, 1.0);
  EXPECT_EQ(scores[1].scores.fidelity, 1.0);
  EXPECT_EQ(scores[1].scores.exceptionality, 1.0);
}

TEST(ScoreBaseline, LongPathTemporalDistanceCapped) {
  const auto gw = deterministic_gridworld();
  const auto q = quick_policy(gw);
  const auto factual = gw.reset(0);
  const std::vector<Action> acts{1, 1, 3, 3, 1};
  BaselineResult<GridworldState> res;
  res.paths = {execute(gw, factual, acts, std::vector<Seed>(5, 0))};
  res.states = {res.paths[0]->end_state()};
  auto scores = score_baseline(gw, q, factual, res, 3, 10, 1);
  EXPECT_EQ(scores[0].scores.temporal_distance, 1.0);
}
