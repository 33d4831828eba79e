#pragma once

#include "sgrl/random.hpp"

#include <cmath>
#include <compare>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sgrl {

using Action = std::uint8_t;
using FeatureVector = std::vector<double>;

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

template <class State>
struct Transition {
  State next_state;
  double reward = 0.0;
  bool terminal = false;
  // Probability of next_state given (state, action).
  double prob = 1.0;
};

template <class State>
struct Outcome {
  State next_state;
  double prob = 0.0;
};

/// One executed step. Shared by recorded trajectories and candidate rollouts.
template <class State>
struct Step {
  State state;
  Action action = 0;
  double reward = 0.0;
  Seed step_seed = 0;
  double prob = 1.0;
  State next_state;
};

template <class State>
struct Rollout {
  State start;
  std::vector<Step<State>> steps;

  std::size_t size() const noexcept { return steps.size(); }
  bool empty() const noexcept { return steps.empty(); }
  const State& end_state() const noexcept {
    return steps.empty() ? start : steps.back().next_state;
  }
  std::vector<Action> actions() const {
    std::vector<Action> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.action);
    return out;
  }
  std::vector<Seed> seeds() const {
    std::vector<Seed> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.step_seed);
    return out;
  }
  // State visited before step i, or the end state for i == size().
  const State& state_at(std::size_t i) const {
    if (i > steps.size()) throw std::out_of_range("rollout index out of range");
    return i == 0 ? start : steps[i - 1].next_state;
  }
  Rollout prefix(std::size_t length) const {
    if (length > steps.size()) throw std::out_of_range("prefix longer than rollout");
    return Rollout{start, {steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(length)}};
  }
};

// A recorded episode has the same shape as a candidate rollout.
template <class State>
using Trajectory = Rollout<State>;

template <class S>
concept EnvState = std::equality_comparable<S> && requires(const S& s) {
  { s.key() } -> std::convertible_to<std::string>;
};

/// Discrete environment with seeded, replayable transitions and an exact
/// transition model.
template <class E>
concept Environment = EnvState<typename E::State> &&
    requires(const E& env, const typename E::State& s, Action a, Seed seed) {
      { env.name() } -> std::convertible_to<std::string>;
      { env.num_actions() } -> std::convertible_to<std::size_t>;
      { env.reset(seed) } -> std::same_as<typename E::State>;
      { env.is_terminal(s) } -> std::same_as<bool>;
      { env.step(s, a, seed) } -> std::same_as<Transition<typename E::State>>;
      { env.transitions(s, a) } -> std::same_as<std::vector<Outcome<typename E::State>>>;
      { env.encode_features(s) } -> std::same_as<FeatureVector>;
    };

/// Environments whose states can be rebuilt from (integer) feature vectors.
/// Needed by the state-space baseline search.
template <class E>
concept PerturbableEnvironment = Environment<E> &&
    requires(const E& env, const FeatureVector& x) {
      { env.feature_bounds() } -> std::same_as<std::vector<std::pair<int, int>>>;
      { env.decode_features(x) } -> std::same_as<std::optional<typename E::State>>;
    };

/// Exact P(next | state, action); 0 for unreachable next states.
template <Environment Env>
double transition_prob(const Env& env, const typename Env::State& state, Action action,
                       const typename Env::State& next) {
  double p = 0.0;
  for (const auto& o : env.transitions(state, action))
    if (o.next_state == next) p += o.prob;
  return p;
}

/// Executes actions from start with the given per-step seeds. Stops early when a
/// terminal state is reached, so the rollout can be shorter than `actions`.
template <Environment Env>
Rollout<typename Env::State> execute(const Env& env, const typename Env::State& start,
                                     std::span<const Action> actions,
                                     std::span<const Seed> seeds) {
  if (seeds.size() < actions.size())
    throw std::invalid_argument("execute: fewer step seeds than actions");
  Rollout<typename Env::State> out{start, {}};
  out.steps.reserve(actions.size());
  auto current = start;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (env.is_terminal(current)) break;
    auto t = env.step(current, actions[i], seeds[i]);
    out.steps.push_back({current, actions[i], t.reward, seeds[i], t.prob, t.next_state});
    current = std::move(t.next_state);
  }
  return out;
}

/// Re-executes the recorded (action, seed) pairs and returns the state
/// reached after `upto` steps.
template <Environment Env>
typename Env::State replay(const Env& env, const Trajectory<typename Env::State>& trajectory,
                           std::size_t upto) {
  if (upto > trajectory.size())
    throw std::out_of_range("replay index " + std::to_string(upto) +
                            " exceeds trajectory length " +
                            std::to_string(trajectory.size()));
  auto state = trajectory.start;
  for (std::size_t i = 0; i < upto; ++i) {
    const auto& rec = trajectory.steps[i];
    state = env.step(state, rec.action, rec.step_seed).next_state;
  }
  return state;
}

inline double l2_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("feature vectors differ in length");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

} // namespace sgrl
