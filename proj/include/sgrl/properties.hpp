#pragma once

#include "sgrl/core.hpp"
#include "sgrl/policy.hpp"

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace sgrl {

/// Scores of one semifactual candidate. The four real-valued properties are
/// all minimized; validity is the search constraint.
struct PropertyScores {
  int validity = 0;
  double temporal_distance = 1.0;
  double stochastic_uncertainty = 1.0;
  double fidelity = 1.0;
  double exceptionality = 1.0;

  std::array<double, 4> objectives() const noexcept {
    return {temporal_distance, stochastic_uncertainty, fidelity, exceptionality};
  }
  bool operator==(const PropertyScores&) const = default;
};

enum class FidelityMode {
  // Softmax evaluated at each visited state of the rollout.
  PerStep,
  // Softmax of the rollout's start state applied to every action.
  StartState,
};

template <class State>
int validity(const QFunction<State>& q, const State& s, const State& s_prime) {
  return greedy_action(q, s) == greedy_action(q, s_prime) ? 1 : 0;
}

template <class State>
double temporal_distance(const Rollout<State>& rollout, std::size_t horizon) {
  if (rollout.empty()) throw std::invalid_argument("temporal distance of an empty rollout");
  if (horizon == 0) throw std::invalid_argument("horizon must be >= 1");
  return static_cast<double>(rollout.size()) / static_cast<double>(horizon);
}

/// Fraction of `samples` freshly seeded executions of `actions` from `start`
/// whose end state keeps the factual state's greedy action. Executions that
/// end in a terminal state count as outcome changes.
template <Environment Env>
double stochastic_uncertainty(const Env& env, const QFunction<typename Env::State>& q,
                              const typename Env::State& factual,
                              const typename Env::State& start,
                              std::span<const Action> actions, std::size_t samples, Seed seed) {
  if (samples < 1) throw std::invalid_argument("stochastic uncertainty needs >= 1 sample");
  const Action outcome = greedy_action(q, factual);
  std::vector<Seed> seeds(actions.size());
  std::size_t preserved = 0;
  for (std::size_t m = 0; m < samples; ++m) {
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_seed({seed, m, i});
    const auto r = execute(env, start, actions, seeds);
    const auto& end = r.end_state();
    if (!env.is_terminal(end) && greedy_action(q, end) == outcome) ++preserved;
  }
  return static_cast<double>(preserved) / static_cast<double>(samples);
}

template <class State>
double fidelity(const QFunction<State>& q, const Rollout<State>& rollout,
                FidelityMode mode = FidelityMode::PerStep) {
  if (rollout.empty()) throw std::invalid_argument("fidelity of an empty rollout");
  double prob = 1.0;
  std::vector<double> start_dist;
  if (mode == FidelityMode::StartState) start_dist = action_distribution(q, rollout.start);
  for (const auto& step : rollout.steps) {
    if (mode == FidelityMode::StartState)
      prob *= start_dist.at(step.action);
    else
      prob *= action_distribution(q, step.state).at(step.action);
  }
  return 1.0 - prob;
}

/// Mean realized transition probability along the rollout.
template <class State>
double exceptionality(const Rollout<State>& rollout) {
  if (rollout.empty()) throw std::invalid_argument("exceptionality of an empty rollout");
  double sum = 0.0;
  for (const auto& step : rollout.steps) sum += step.prob;
  return sum / static_cast<double>(rollout.size());
}

inline double gain(std::span<const double> x, std::span<const double> x_prime) {
  return l2_distance(x, x_prime);
}

struct Diversity {
  // Mean distance from the factual features to each member.
  double to_factual = 0.0;
  // Mean distance over unordered pairs of members; 0 for singletons.
  double pairwise = 0.0;
};

inline Diversity diversity(std::span<const double> x, std::span<const FeatureVector> set) {
  if (set.empty()) throw std::invalid_argument("diversity of an empty set");
  Diversity d;
  for (const auto& xp : set) d.to_factual += l2_distance(x, xp);
  d.to_factual /= static_cast<double>(set.size());
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = i + 1; j < set.size(); ++j, ++pairs)
      d.pairwise += l2_distance(set[i], set[j]);
  if (pairs > 0) d.pairwise /= static_cast<double>(pairs);
  return d;
}

inline double pairwise_diversity(std::span<const FeatureVector> set) {
  if (set.empty()) return 0.0;
  return diversity(set.front(), set).pairwise;
}

} // namespace sgrl
