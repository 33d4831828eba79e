#pragma once

#include "sgrl/core.hpp"
#include "sgrl/nsga2.hpp"
#include "sgrl/policy.hpp"
#include "sgrl/properties.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace sgrl {

enum class Direction { Advance, Rewind };

inline const char* to_string(Direction d) noexcept {
  return d == Direction::Advance ? "advance" : "rewind";
}

struct ExplanationRequest {
  // Index n of the factual state s_n in the trajectory.
  std::size_t factual_index = 0;
  std::size_t horizon = 3;
  Direction direction = Direction::Advance;
  MooConfig moo;
  // Monte-Carlo samples for stochastic uncertainty during search.
  std::size_t su_samples = 30;
  Seed seed = 0;
  std::uint64_t factual_id = 0;
  FidelityMode fidelity_mode = FidelityMode::PerStep;
};

template <class State>
struct SemifactualCandidate {
  State state;
  Rollout<State> rollout;
  PropertyScores scores;
  Direction origin = Direction::Advance;
  double feature_gain = 0.0;
};

template <class State>
struct ExplanationSet {
  State factual_state;
  Action chosen_action = 0;
  std::vector<SemifactualCandidate<State>> candidates;
  std::size_t evaluations = 0;
  std::size_t archive_size = 0;
  double wall_seconds = 0.0;

  bool empty() const noexcept { return candidates.empty(); }
};

/// Scores a candidate rollout against the factual state. Stochastic
/// uncertainty re-executes the rollout's actions from its start state.
template <Environment Env>
PropertyScores score_candidate(const Env& env, const QFunction<typename Env::State>& q,
                               const typename Env::State& factual,
                               const Rollout<typename Env::State>& rollout, std::size_t horizon,
                               std::size_t su_samples, Seed seed,
                               FidelityMode mode = FidelityMode::PerStep) {
  if (rollout.empty()) throw std::invalid_argument("score_candidate: empty rollout");
  PropertyScores s;
  s.validity = validity(q, factual, rollout.end_state());
  s.temporal_distance = temporal_distance(rollout, horizon);
  const auto actions = rollout.actions();
  s.stochastic_uncertainty =
      stochastic_uncertainty(env, q, factual, rollout.start, actions, su_samples, seed);
  s.fidelity = fidelity(q, rollout, mode);
  s.exceptionality = exceptionality(rollout);
  return s;
}

/// Lexicographic (objectives, action path) order; used to pick one
/// representative when several paths reach the same state.
template <class State>
bool preferred_candidate(const SemifactualCandidate<State>& a, const SemifactualCandidate<State>& b) {
  const auto oa = a.scores.objectives(), ob = b.scores.objectives();
  if (oa != ob) return oa < ob;
  return a.rollout.actions() < b.rollout.actions();
}

inline bool scores_dominate(const PropertyScores& a, const PropertyScores& b) {
  const auto oa = a.objectives(), ob = b.objectives();
  bool strict = false;
  for (std::size_t i = 0; i < oa.size(); ++i) {
    if (oa[i] > ob[i]) return false;
    if (oa[i] < ob[i]) strict = true;
  }
  return strict;
}

/// Nondominated members of `pool`, ordered by (objectives, state key).
template <class State>
std::vector<SemifactualCandidate<State>> pareto_front(
    const std::vector<SemifactualCandidate<State>>& pool) {
  std::vector<SemifactualCandidate<State>> front;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pool.size() && !dominated; ++j)
      dominated = j != i && scores_dominate(pool[j].scores, pool[i].scores);
    if (!dominated) front.push_back(pool[i]);
  }
  std::sort(front.begin(), front.end(), [](const auto& a, const auto& b) {
    const auto oa = a.scores.objectives(), ob = b.scores.objectives();
    if (oa != ob) return oa < ob;
    return a.state.key() < b.state.key();
  });
  return front;
}

/// NSGA-II problem over action sequences executed from a fixed start state
/// under fixed per-step seeds. Every valid, non-terminal prefix state that
/// differs from the factual state is archived as a candidate.
template <Environment Env>
class SemifactualSearch {
public:
  using State = typename Env::State;

  SemifactualSearch(const Env& env, const QFunction<State>& q, State factual, State start,
                    std::vector<Seed> step_seeds, const ExplanationRequest& request)
      : env_(env), q_(q), factual_(std::move(factual)), start_(std::move(start)),
        seeds_(std::move(step_seeds)), request_(request),
        outcome_(greedy_action(q, factual_)), factual_features_(env.encode_features(factual_)) {
    if (seeds_.size() != request_.horizon)
      throw std::invalid_argument("one step seed per horizon step required");
  }

  std::size_t genome_length() const noexcept { return request_.horizon; }
  std::size_t num_alleles() const { return env_.num_actions(); }

  /// Uniform random genomes plus the greedy policy's own action sequence.
  std::vector<Genome> initial_population(std::size_t n, SplitMix64& rng) const {
    std::vector<Genome> out;
    out.reserve(n);
    out.push_back(greedy_genome());
    while (out.size() < n) {
      Genome g(genome_length());
      for (auto& gene : g) gene = static_cast<Action>(rng.below(num_alleles()));
      out.push_back(std::move(g));
    }
    return out;
  }

  Genome greedy_genome() const {
    Genome g;
    auto s = start_;
    for (std::size_t i = 0; i < genome_length(); ++i) {
      const Action a = env_.is_terminal(s) ? Action{0} : greedy_action(q_, s);
      g.push_back(a);
      if (!env_.is_terminal(s)) s = env_.step(s, a, seeds_[i]).next_state;
    }
    return g;
  }

  /// Valid candidates reached by the prefixes of `genome`.
  std::vector<SemifactualCandidate<State>> candidates_of(const Genome& genome) const {
    std::vector<SemifactualCandidate<State>> out;
    const auto rollout = execute(env_, start_, std::span<const Action>(genome), seeds_);
    for (std::size_t len = 1; len <= rollout.size(); ++len) {
      const State& s = rollout.steps[len - 1].next_state;
      if (env_.is_terminal(s) || greedy_action(q_, s) != outcome_) continue;
      const double g = gain(factual_features_, env_.encode_features(s));
      if (g <= 0.0) continue;
      auto prefix = rollout.prefix(len);
      const auto actions = prefix.actions();
      const Seed su_seed =
          derive_seed({request_.seed, request_.factual_id,
                       static_cast<std::uint64_t>(request_.direction),
                       hash_sequence(std::span<const Action>(actions))});
      auto scores = score_candidate(env_, q_, factual_, prefix, request_.horizon,
                                    request_.su_samples, su_seed, request_.fidelity_mode);
      out.push_back({s, std::move(prefix), scores, request_.direction, g});
    }
    return out;
  }

  /// Genome fitness: mean objective vector of its candidates; infeasible
  /// (violation 1) when it reaches none.
  Evaluation evaluate(const Genome& genome) {
    auto cands = candidates_of(genome);
    if (cands.empty()) return {{}, 1.0};
    std::vector<double> mean(4, 0.0);
    for (auto& c : cands) {
      const auto o = c.scores.objectives();
      for (std::size_t i = 0; i < 4; ++i) mean[i] += o[i];
      archive(std::move(c));
    }
    for (auto& v : mean) v /= static_cast<double>(cands.size());
    return {mean, 0.0};
  }

  std::vector<SemifactualCandidate<State>> archived() const {
    std::vector<SemifactualCandidate<State>> out;
    out.reserve(archive_.size());
    for (const auto& [key, c] : archive_) out.push_back(c);
    return out;
  }

  const State& factual() const noexcept { return factual_; }
  Action outcome() const noexcept { return outcome_; }

private:
  void archive(SemifactualCandidate<State> c) {
    auto key = c.state.key();
    auto it = archive_.find(key);
    if (it == archive_.end())
      archive_.emplace(std::move(key), std::move(c));
    else if (preferred_candidate(c, it->second))
      it->second = std::move(c);
  }

  const Env& env_;
  const QFunction<State>& q_;
  State factual_;
  State start_;
  std::vector<Seed> seeds_;
  ExplanationRequest request_;
  Action outcome_;
  FeatureVector factual_features_;
  std::map<std::string, SemifactualCandidate<State>> archive_;
};

namespace detail {

template <Environment Env>
ExplanationSet<typename Env::State> run_search(SemifactualSearch<Env>& search,
                                               const ExplanationRequest& request) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto evolved = evolve(search, request.moo);
  ExplanationSet<typename Env::State> set;
  set.factual_state = search.factual();
  set.chosen_action = search.outcome();
  const auto pool = search.archived();
  set.archive_size = pool.size();
  set.candidates = pareto_front(pool);
  set.evaluations = evolved.evaluations;
  set.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return set;
}

} // namespace detail

/// Forward semifactuals: alternative futures of k actions from s_n.
template <Environment Env>
ExplanationSet<typename Env::State> advance_explain(const Env& env,
                                                    const QFunction<typename Env::State>& q,
                                                    const Trajectory<typename Env::State>& trajectory,
                                                    ExplanationRequest request) {
  if (request.direction != Direction::Advance)
    throw std::invalid_argument("advance_explain needs an ADVANCE request");
  if (request.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  auto factual = replay(env, trajectory, request.factual_index);
  if (env.is_terminal(factual)) throw std::invalid_argument("factual state is terminal");
  std::vector<Seed> seeds(request.horizon);
  for (std::size_t i = 0; i < seeds.size(); ++i)
    seeds[i] = derive_seed({request.seed, request.factual_id, 0xADULL, i});
  SemifactualSearch<Env> search(env, q, factual, factual, std::move(seeds), request);
  return detail::run_search(search, request);
}

/// Backward semifactuals: alternative k-action histories from s_{n-k},
/// executed under the recorded per-step seeds.
template <Environment Env>
ExplanationSet<typename Env::State> rewind_explain(const Env& env,
                                                   const QFunction<typename Env::State>& q,
                                                   const Trajectory<typename Env::State>& trajectory,
                                                   ExplanationRequest request) {
  if (request.direction != Direction::Rewind)
    throw std::invalid_argument("rewind_explain needs a REWIND request");
  if (request.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const std::size_t n = request.factual_index;
  if (n < request.horizon)
    throw std::invalid_argument("insufficient history: index " + std::to_string(n) +
                                " < horizon " + std::to_string(request.horizon));
  auto factual = replay(env, trajectory, n);
  if (env.is_terminal(factual)) throw std::invalid_argument("factual state is terminal");
  auto start = replay(env, trajectory, n - request.horizon);
  std::vector<Seed> seeds;
  for (std::size_t i = n - request.horizon; i < n; ++i)
    seeds.push_back(trajectory.steps[i].step_seed);
  SemifactualSearch<Env> search(env, q, factual, start, std::move(seeds), request);
  return detail::run_search(search, request);
}

template <Environment Env>
ExplanationSet<typename Env::State> explain(const Env& env, const QFunction<typename Env::State>& q,
                                            const Trajectory<typename Env::State>& trajectory,
                                            const ExplanationRequest& request) {
  return request.direction == Direction::Advance ? advance_explain(env, q, trajectory, request)
                                                 : rewind_explain(env, q, trajectory, request);
}

template <class State>
const SemifactualCandidate<State>& select_presentation(const ExplanationSet<State>& set, Seed seed) {
  if (set.candidates.empty()) throw std::invalid_argument("no candidate to present");
  SplitMix64 rng(seed);
  return set.candidates[rng.below(set.candidates.size())];
}

} // namespace sgrl
