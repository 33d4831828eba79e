#pragma once

#include "sgrl/baseline.hpp"
#include "sgrl/core.hpp"
#include "sgrl/frozen_lake.hpp"
#include "sgrl/generators.hpp"
#include "sgrl/gridworld.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgrl {

using json = nlohmann::json;

inline void to_json(json& j, const Cell& c) { j = json::array({c.row, c.col}); }
inline void from_json(const json& j, Cell& c) {
  if (!j.is_array() || j.size() != 2) throw std::runtime_error("cell must be [row, col]");
  c = {j.at(0).get<int>(), j.at(1).get<int>()};
}

NLOHMANN_JSON_SERIALIZE_ENUM(ObstacleKind, {{ObstacleKind::Tree, "tree"}, {ObstacleKind::Wall, "wall"}})

inline void to_json(json& j, const Obstacle& o) { j = {{"cell", o.cell}, {"kind", o.kind}}; }
inline void from_json(const json& j, Obstacle& o) {
  j.at("cell").get_to(o.cell);
  j.at("kind").get_to(o.kind);
}

// Config readers accept partial objects; missing keys keep their defaults.
inline void to_json(json& j, const GridworldConfig& c) {
  j = {{"rows", c.rows},
       {"cols", c.cols},
       {"start", c.start},
       {"dragon", c.dragon},
       {"obstacles", c.obstacles},
       {"step_reward", c.step_reward},
       {"chop_tree_reward", c.chop_tree_reward},
       {"chop_wall_reward", c.chop_wall_reward},
       {"wasted_action_reward", c.wasted_action_reward},
       {"shoot_reward", c.shoot_reward},
       {"tree_regrow_prob", c.tree_regrow_prob},
       {"wall_rebuild_prob", c.wall_rebuild_prob}};
}
inline void from_json(const json& j, GridworldConfig& c) {
  c.rows = j.value("rows", c.rows);
  c.cols = j.value("cols", c.cols);
  if (j.contains("start")) j.at("start").get_to(c.start);
  if (j.contains("dragon")) j.at("dragon").get_to(c.dragon);
  if (j.contains("obstacles")) j.at("obstacles").get_to(c.obstacles);
  c.step_reward = j.value("step_reward", c.step_reward);
  c.chop_tree_reward = j.value("chop_tree_reward", c.chop_tree_reward);
  c.chop_wall_reward = j.value("chop_wall_reward", c.chop_wall_reward);
  c.wasted_action_reward = j.value("wasted_action_reward", c.wasted_action_reward);
  c.shoot_reward = j.value("shoot_reward", c.shoot_reward);
  c.tree_regrow_prob = j.value("tree_regrow_prob", c.tree_regrow_prob);
  c.wall_rebuild_prob = j.value("wall_rebuild_prob", c.wall_rebuild_prob);
}

inline void to_json(json& j, const FrozenLakeConfig& c) {
  j = {{"rows", c.rows},         {"cols", c.cols},
       {"start", c.start},       {"goal", c.goal},
       {"frozen", c.frozen},     {"intended_prob", c.intended_prob},
       {"step_reward", c.step_reward}, {"goal_reward", c.goal_reward}};
}
inline void from_json(const json& j, FrozenLakeConfig& c) {
  c.rows = j.value("rows", c.rows);
  c.cols = j.value("cols", c.cols);
  if (j.contains("start")) j.at("start").get_to(c.start);
  if (j.contains("goal")) j.at("goal").get_to(c.goal);
  if (j.contains("frozen")) j.at("frozen").get_to(c.frozen);
  c.intended_prob = j.value("intended_prob", c.intended_prob);
  c.step_reward = j.value("step_reward", c.step_reward);
  c.goal_reward = j.value("goal_reward", c.goal_reward);
}

inline void to_json(json& j, const TrainingConfig& c) {
  j = {{"steps", c.steps},
       {"learning_rate", c.learning_rate},
       {"discount", c.discount},
       {"epsilon_start", c.epsilon_start},
       {"epsilon_end", c.epsilon_end},
       {"epsilon_decay_steps", c.epsilon_decay_steps},
       {"max_episode_steps", c.max_episode_steps},
       {"exploring_start_prob", c.exploring_start_prob}};
}
inline void from_json(const json& j, TrainingConfig& c) {
  c.steps = j.value("steps", c.steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.discount = j.value("discount", c.discount);
  c.epsilon_start = j.value("epsilon_start", c.epsilon_start);
  c.epsilon_end = j.value("epsilon_end", c.epsilon_end);
  c.epsilon_decay_steps = j.value("epsilon_decay_steps", c.epsilon_decay_steps);
  c.max_episode_steps = j.value("max_episode_steps", c.max_episode_steps);
  c.exploring_start_prob = j.value("exploring_start_prob", c.exploring_start_prob);
}

inline void to_json(json& j, const MooConfig& c) {
  j = {{"generations", c.generations},     {"population", c.population},
       {"mutation_rate", c.mutation_rate}, {"crossover_rate", c.crossover_rate},
       {"tournament_size", c.tournament_size}, {"novelty_retries", c.novelty_retries}};
}
inline void from_json(const json& j, MooConfig& c) {
  c.generations = j.value("generations", c.generations);
  c.population = j.value("population", c.population);
  c.mutation_rate = j.value("mutation_rate", c.mutation_rate);
  c.crossover_rate = j.value("crossover_rate", c.crossover_rate);
  c.tournament_size = j.value("tournament_size", c.tournament_size);
  c.novelty_retries = j.value("novelty_retries", c.novelty_retries);
}

inline void to_json(json& j, const BaselineConfig& c) {
  j = {{"radius", c.radius},
       {"robustness_samples", c.robustness_samples},
       {"budget", c.budget},
       {"population", c.population}};
}
inline void from_json(const json& j, BaselineConfig& c) {
  c.radius = j.value("radius", c.radius);
  c.robustness_samples = j.value("robustness_samples", c.robustness_samples);
  c.budget = j.value("budget", c.budget);
  c.population = j.value("population", c.population);
}

inline void to_json(json& j, const GridworldState& s) {
  j = {{"agent", s.agent}, {"dragon", s.dragon}, {"obstacles", s.present}, {"done", s.done}};
}
inline void from_json(const json& j, GridworldState& s) {
  j.at("agent").get_to(s.agent);
  j.at("dragon").get_to(s.dragon);
  j.at("obstacles").get_to(s.present);
  s.done = j.value("done", false);
}

inline void to_json(json& j, const FrozenLakeState& s) {
  j = {{"agent", s.agent}, {"done", s.done}};
}
inline void from_json(const json& j, FrozenLakeState& s) {
  j.at("agent").get_to(s.agent);
  s.done = j.value("done", false);
}

/// Line-delimited trajectory records:
/// {"step_index", "state", "action", "reward", "step_seed"}.
template <class State>
void write_trajectory(std::ostream& os, const Trajectory<State>& t) {
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    json j = {{"step_index", i},
              {"state", s.state},
              {"action", s.action},
              {"reward", s.reward},
              {"step_seed", s.step_seed}};
    os << j.dump() << '\n';
  }
}

/// Reads records and re-executes them, so next states and probabilities come
/// from the environment. Fails if a recorded state disagrees with replay.
template <Environment Env>
Trajectory<typename Env::State> read_trajectory(std::istream& is, const Env& env) {
  using State = typename Env::State;
  Trajectory<State> t;
  std::string line;
  std::size_t expected = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (j.at("step_index").get<std::size_t>() != expected)
      throw std::runtime_error("trajectory step_index out of order at " + std::to_string(expected));
    const State recorded = j.at("state").get<State>();
    if (expected == 0)
      t.start = recorded;
    else if (!(recorded == t.steps.back().next_state))
      throw std::runtime_error("trajectory record " + std::to_string(expected) +
                               " does not match replay");
    const Action a = j.at("action").get<Action>();
    const Seed seed = j.at("step_seed").get<Seed>();
    const auto tr = env.step(recorded, a, seed);
    t.steps.push_back({recorded, a, tr.reward, seed, tr.prob, tr.next_state});
    ++expected;
  }
  if (expected == 0) throw std::runtime_error("empty trajectory");
  return t;
}

template <class State>
json scores_json(const PropertyScores& s) {
  return {{"validity", s.validity},
          {"temporal_distance", s.temporal_distance},
          {"stochastic_uncertainty", s.stochastic_uncertainty},
          {"fidelity", s.fidelity},
          {"exceptionality", s.exceptionality}};
}

template <class State>
json to_json(const ExplanationSet<State>& set) {
  json cands = json::array();
  for (const auto& c : set.candidates) {
    cands.push_back({{"state", c.state},
                     {"origin", to_string(c.origin)},
                     {"start", c.rollout.start},
                     {"actions", c.rollout.actions()},
                     {"scores", scores_json<State>(c.scores)},
                     {"feature_gain", c.feature_gain}});
  }
  return {{"factual_state", set.factual_state},
          {"chosen_action", set.chosen_action},
          {"evaluations", set.evaluations},
          {"candidates", cands}};
}

template <class T>
T load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return json::parse(is).get<T>();
}

} // namespace sgrl
