#pragma once

#include "sgrl/core.hpp"
#include "sgrl/generators.hpp"
#include "sgrl/nsga2.hpp"
#include "sgrl/policy.hpp"
#include "sgrl/properties.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace sgrl {

/// State-space semifactual baseline in the style of non-causal S-GEN:
/// search directly over feature vectors for valid states that are far from
/// the factual (gain) and sit in a region of stable outcome (robustness), then
/// keep D mutually distant ones (diversity).
struct BaselineConfig {
  std::size_t diversity_count = 1;
  // Maximum per-feature perturbation of a mutation.
  int radius = 4;
  // Cap on unit-perturbation neighbours used for robustness.
  std::size_t robustness_samples = 32;
  // Number of state evaluations.
  std::size_t budget = 600;
  std::size_t population = 24;
  Seed seed = 0;

  void validate() const {
    if (diversity_count < 1) throw std::invalid_argument("diversity count must be >= 1");
    if (budget < 1) throw std::invalid_argument("budget must be >= 1");
    if (radius < 1) throw std::invalid_argument("radius must be >= 1");
    if (population < 2) throw std::invalid_argument("population must be >= 2");
  }
};

template <class State>
struct BaselineResult {
  std::vector<State> states;
  std::vector<double> gains;
  std::vector<double> robustness;
  std::vector<std::optional<Rollout<State>>> paths;
  std::size_t evaluations = 0;

  bool empty() const noexcept { return states.empty(); }
};

struct BaselineScore {
  PropertyScores scores;
  bool path_found = false;
};

/// Fraction of valid unit-perturbation neighbours of `x` whose greedy action
/// equals `outcome`.
template <PerturbableEnvironment Env>
double robustness(const Env& env, const QFunction<typename Env::State>& q, const FeatureVector& x,
                  Action outcome, std::size_t cap = std::numeric_limits<std::size_t>::max()) {
  const auto bounds = env.feature_bounds();
  std::size_t total = 0, same = 0;
  for (std::size_t i = 0; i < x.size() && total < cap; ++i) {
    for (int delta : {-1, 1}) {
      if (total >= cap) break;
      FeatureVector y = x;
      y[i] += delta;
      if (y[i] < bounds[i].first || y[i] > bounds[i].second) continue;
      auto s = env.decode_features(y);
      if (!s) continue;
      ++total;
      if (greedy_action(q, *s) == outcome) ++same;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(same) / static_cast<double>(total);
}

namespace detail {

inline double min_pairwise(const std::vector<FeatureVector>& xs, const std::vector<std::size_t>& idx) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = i + 1; j < idx.size(); ++j)
      best = std::min(best, l2_distance(xs[idx[i]], xs[idx[j]]));
  return best;
}

} // namespace detail

/// Picks `count` members of `pool` (ordered best-first) by greedy max-min
/// distance seeded with pool[0], then applies single swaps while they strictly
/// raise the minimum pairwise distance.
inline std::vector<std::size_t> select_diverse(const std::vector<FeatureVector>& pool,
                                               std::size_t count) {
  std::vector<std::size_t> chosen;
  if (pool.empty() || count == 0) return chosen;
  chosen.push_back(0);
  std::vector<bool> used(pool.size(), false);
  used[0] = true;
  while (chosen.size() < count && chosen.size() < pool.size()) {
    std::size_t best = pool.size();
    double best_d = -1.0;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (used[c]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (auto s : chosen) d = std::min(d, l2_distance(pool[c], pool[s]));
      if (d > best_d) {
        best_d = d;
        best = c;
      }
    }
    chosen.push_back(best);
    used[best] = true;
  }
  if (chosen.size() < 2) return chosen;
  for (bool improved = true; improved;) {
    improved = false;
    double current = detail::min_pairwise(pool, chosen);
    for (std::size_t i = 0; i < chosen.size() && !improved; ++i) {
      for (std::size_t c = 0; c < pool.size() && !improved; ++c) {
        if (used[c]) continue;
        auto trial = chosen;
        trial[i] = c;
        const double d = detail::min_pairwise(pool, trial);
        if (d > current) {
          used[chosen[i]] = false;
          used[c] = true;
          chosen = std::move(trial);
          current = d;
          improved = true;
        }
      }
    }
  }
  return chosen;
}

template <PerturbableEnvironment Env>
BaselineResult<typename Env::State> sgen_explain(const Env& env,
                                                 const QFunction<typename Env::State>& q,
                                                 const typename Env::State& factual,
                                                 const BaselineConfig& config) {
  using State = typename Env::State;
  config.validate();
  if (env.is_terminal(factual)) throw std::invalid_argument("factual state is terminal");

  const auto bounds = env.feature_bounds();
  const FeatureVector x0 = env.encode_features(factual);
  const std::size_t dims = x0.size();
  const Action outcome = greedy_action(q, factual);
  double max_gain = 0.0;
  for (const auto& [lo, hi] : bounds) max_gain += double(hi - lo) * double(hi - lo);
  max_gain = std::max(std::sqrt(max_gain), 1e-12);

  constexpr double kInvalid = -std::numeric_limits<double>::infinity();
  struct Scored {
    FeatureVector x;
    double fitness = kInvalid;
    double gain = 0.0;
    double robustness = 0.0;
  };
  std::map<FeatureVector, Scored> cache;
  std::size_t evaluations = 0;

  auto clamp = [&](FeatureVector x) {
    for (std::size_t i = 0; i < dims; ++i)
      x[i] = std::clamp(x[i], double(bounds[i].first), double(bounds[i].second));
    return x;
  };
  auto score = [&](const FeatureVector& x) -> Scored {
    if (auto it = cache.find(x); it != cache.end()) return it->second;
    ++evaluations;
    Scored s{x};
    if (auto st = env.decode_features(x); st && greedy_action(q, *st) == outcome) {
      s.gain = gain(x0, x);
      if (s.gain > 0.0) {
        s.robustness = robustness(env, q, x, outcome, config.robustness_samples);
        s.fitness = s.gain / max_gain + s.robustness;
      }
    }
    cache.emplace(x, s);
    return s;
  };

  SplitMix64 rng(derive_seed({config.seed, 0x5347'454EULL}));
  auto perturb = [&](FeatureVector x, double rate) {
    bool changed = false;
    for (std::size_t i = 0; i < dims; ++i) {
      if (rng.uniform() >= rate) continue;
      int delta = 0;
      while (delta == 0) delta = static_cast<int>(rng.below(2 * config.radius + 1)) - config.radius;
      x[i] += delta;
      changed = true;
    }
    if (!changed) {
      const std::size_t i = rng.below(dims);
      x[i] += rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    return clamp(std::move(x));
  };
  auto by_fitness = [](const Scored& a, const Scored& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    return a.x < b.x;
  };

  std::vector<Scored> pop;
  while (pop.size() < config.population && evaluations < config.budget)
    pop.push_back(score(perturb(x0, 0.5)));

  auto tournament = [&]() -> const Scored& {
    const Scored& a = pop[rng.below(pop.size())];
    const Scored& b = pop[rng.below(pop.size())];
    return by_fitness(b, a) ? b : a;
  };

  std::size_t stale = 0;
  while (evaluations < config.budget) {
    const std::size_t before = evaluations;
    std::vector<Scored> children;
    for (std::size_t c = 0; c < config.population && evaluations < config.budget; ++c) {
      const auto& pa = tournament();
      const auto& pb = tournament();
      FeatureVector child(dims);
      for (std::size_t i = 0; i < dims; ++i) child[i] = rng.uniform() < 0.5 ? pa.x[i] : pb.x[i];
      children.push_back(score(perturb(std::move(child), 1.0 / double(dims))));
    }
    pop.insert(pop.end(), children.begin(), children.end());
    std::sort(pop.begin(), pop.end(), by_fitness);
    pop.erase(std::unique(pop.begin(), pop.end(),
                          [](const Scored& a, const Scored& b) { return a.x == b.x; }),
              pop.end());
    if (pop.size() > config.population) pop.resize(config.population);
    // Stop once the search only revisits cached points.
    stale = evaluations == before ? stale + 1 : 0;
    if (stale > 50) break;
  }

  // Final pool: every valid state seen, best first.
  std::vector<Scored> pool;
  for (const auto& [x, s] : cache)
    if (s.fitness != kInvalid) pool.push_back(s);
  std::sort(pool.begin(), pool.end(), by_fitness);
  if (pool.size() > config.population) pool.resize(config.population);

  BaselineResult<State> result;
  result.evaluations = evaluations;
  std::vector<FeatureVector> xs;
  for (const auto& s : pool) xs.push_back(s.x);
  for (auto i : select_diverse(xs, config.diversity_count)) {
    result.states.push_back(*env.decode_features(pool[i].x));
    result.gains.push_back(pool[i].gain);
    result.robustness.push_back(pool[i].robustness);
    result.paths.emplace_back(std::nullopt);
  }
  return result;
}

namespace detail {

template <Environment Env>
class PathSearch {
public:
  using State = typename Env::State;

  PathSearch(const Env& env, State start, State target, std::size_t horizon, Seed seed)
      : env_(env), start_(std::move(start)), target_(std::move(target)), horizon_(horizon),
        target_features_(env.encode_features(target_)) {
    for (std::size_t i = 0; i < horizon; ++i) seeds_.push_back(derive_seed({seed, 0x9A7ULL, i}));
  }

  std::size_t genome_length() const noexcept { return horizon_; }
  std::size_t num_alleles() const { return env_.num_actions(); }

  std::vector<Genome> initial_population(std::size_t n, SplitMix64& rng) const {
    std::vector<Genome> out(n, Genome(horizon_));
    for (auto& g : out)
      for (auto& gene : g) gene = static_cast<Action>(rng.below(num_alleles()));
    return out;
  }

  Evaluation evaluate(const Genome& genome) {
    const auto r = execute(env_, start_, std::span<const Action>(genome), seeds_);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_len = horizon_;
    for (std::size_t len = 1; len <= r.size(); ++len) {
      const auto& s = r.steps[len - 1].next_state;
      const double d = l2_distance(env_.encode_features(s), target_features_);
      if (d < best) {
        best = d;
        best_len = len;
      }
      if (s == target_) {
        auto prefix = r.prefix(len);
        if (!match_ || prefix.size() < match_->size() ||
            (prefix.size() == match_->size() && prefix.actions() < match_->actions()))
          match_ = std::move(prefix);
        break;
      }
    }
    return {{best, static_cast<double>(best_len)}, 0.0};
  }

  const std::optional<Rollout<State>>& match() const noexcept { return match_; }

private:
  const Env& env_;
  State start_;
  State target_;
  std::size_t horizon_;
  FeatureVector target_features_;
  std::vector<Seed> seeds_;
  std::optional<Rollout<State>> match_;
};

} // namespace detail

/// Evolutionary search for an action sequence of length <= horizon that
/// takes `start` exactly to `target` under seed-fixed dynamics. Returns the
/// shortest match found.
template <Environment Env>
std::optional<Rollout<typename Env::State>> find_action_path(const Env& env,
                                                            const typename Env::State& start,
                                                            const typename Env::State& target,
                                                            std::size_t horizon,
                                                            std::size_t budget, Seed seed) {
  if (horizon < 1) throw std::invalid_argument("path horizon must be >= 1");
  if (start == target || env.is_terminal(start)) return std::nullopt;
  detail::PathSearch<Env> search(env, start, target, horizon, seed);
  MooConfig moo;
  moo.population = 24;
  moo.generations = budget > moo.population ? budget / moo.population - 1 : 0;
  moo.seed = seed;
  evolve(search, moo);
  return search.match();
}

/// Fills result.paths by searching an action path from the factual state to
/// every baseline state.
template <Environment Env>
void attach_paths(const Env& env, const typename Env::State& factual,
                  BaselineResult<typename Env::State>& result, std::size_t horizon,
                  std::size_t budget, Seed seed) {
  result.paths.resize(result.states.size());
  for (std::size_t i = 0; i < result.states.size(); ++i)
    result.paths[i] =
        find_action_path(env, factual, result.states[i], horizon, budget, derive_seed({seed, i}));
}

/// Scores baseline states on the RL properties through their matched paths.
/// Temporal distance is capped at 1 for paths longer than the horizon; states
/// without a path get the worst case on every minimized property.
template <Environment Env>
std::vector<BaselineScore> score_baseline(const Env& env, const QFunction<typename Env::State>& q,
                                          const typename Env::State& factual,
                                          const BaselineResult<typename Env::State>& result,
                                          std::size_t horizon, std::size_t su_samples, Seed seed) {
  std::vector<BaselineScore> out;
  for (std::size_t i = 0; i < result.states.size(); ++i) {
    BaselineScore b;
    const auto* path = i < result.paths.size() && result.paths[i] ? &*result.paths[i] : nullptr;
    if (path) {
      b.scores = score_candidate(env, q, factual, *path, horizon, su_samples, derive_seed({seed, i}));
      b.scores.temporal_distance = std::min(1.0, b.scores.temporal_distance);
      b.path_found = true;
    } else {
      b.scores = {validity(q, factual, result.states[i]), 1.0, 1.0, 1.0, 1.0};
    }
    out.push_back(b);
  }
  return out;
}

} // namespace sgrl
