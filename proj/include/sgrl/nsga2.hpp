#pragma once

#include "sgrl/core.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgrl {

using Genome = std::vector<Action>;

struct Evaluation {
  std::vector<double> objectives;
  // > 0 marks the genome infeasible.
  double violation = 0.0;
};

struct Individual {
  Genome genome;
  std::vector<double> objectives;
  double violation = 0.0;
  std::size_t rank = 0;
  double crowding = 0.0;

  bool feasible() const noexcept { return violation <= 0.0; }
};

struct MooConfig {
  std::size_t generations = 25;
  std::size_t population = 24;
  // Per-gene resampling probability; negative means 1 / genome length.
  double mutation_rate = -1.0;
  double crossover_rate = 0.9;
  std::size_t tournament_size = 2;
  // Children that duplicate an already evaluated genome are re-mutated up to
  // this many times before being accepted as is.
  std::size_t novelty_retries = 16;
  Seed seed = 0;

  void validate() const {
    if (population < 2 || population % 2 != 0)
      throw std::invalid_argument("population size must be even and >= 2");
    if (crossover_rate < 0.0 || crossover_rate > 1.0)
      throw std::invalid_argument("crossover rate must be in [0,1]");
    if (mutation_rate > 1.0) throw std::invalid_argument("mutation rate must be <= 1");
    if (tournament_size < 1) throw std::invalid_argument("tournament size must be >= 1");
  }

  double effective_mutation_rate(std::size_t genome_length) const noexcept {
    if (mutation_rate >= 0.0) return mutation_rate;
    return genome_length == 0 ? 0.0 : 1.0 / static_cast<double>(genome_length);
  }
};

/// Constrained dominance for minimization: feasible beats infeasible, smaller
/// violation wins among infeasible, Pareto dominance among feasible.
inline bool dominates(const Individual& a, const Individual& b) {
  if (a.feasible() != b.feasible()) return a.feasible();
  if (!a.feasible()) return a.violation < b.violation;
  if (a.objectives.size() != b.objectives.size())
    throw std::invalid_argument("dominates: objective vectors differ in length");
  bool strict = false;
  for (std::size_t i = 0; i < a.objectives.size(); ++i) {
    if (a.objectives[i] > b.objectives[i]) return false;
    if (a.objectives[i] < b.objectives[i]) strict = true;
  }
  return strict;
}

/// Fast nondominated sort. Returns fronts as index lists into `pop`, best
/// front first; indices within a front are ascending.
inline std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const Individual> pop) {
  const std::size_t n = pop.size();
  std::vector<std::vector<std::size_t>> dominated_by(n);
  std::vector<std::size_t> domination_count(n, 0);
  std::vector<std::vector<std::size_t>> fronts(1);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(pop[p], pop[q]))
        dominated_by[p].push_back(q);
      else if (dominates(pop[q], pop[p]))
        ++domination_count[p];
    }
    if (domination_count[p] == 0) fronts[0].push_back(p);
  }
  if (fronts[0].empty()) return {};
  for (std::size_t i = 0; !fronts[i].empty(); ++i) {
    std::vector<std::size_t> next;
    for (auto p : fronts[i])
      for (auto q : dominated_by[p])
        if (--domination_count[q] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(next));
  }
  fronts.pop_back();
  return fronts;
}

/// Crowding distance of each member of `front` (same order as `front`).
inline std::vector<double> crowding_distance(std::span<const Individual> pop,
                                             std::span<const std::size_t> front) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t m = front.size();
  std::vector<double> dist(m, 0.0);
  if (m <= 2) {
    std::fill(dist.begin(), dist.end(), inf);
    return dist;
  }
  const std::size_t n_obj = pop[front[0]].objectives.size();
  std::vector<std::size_t> order(m);
  for (std::size_t k = 0; k < n_obj; ++k) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return pop[front[a]].objectives[k] < pop[front[b]].objectives[k];
    });
    const double lo = pop[front[order.front()]].objectives[k];
    const double hi = pop[front[order.back()]].objectives[k];
    dist[order.front()] = inf;
    dist[order.back()] = inf;
    if (hi <= lo) continue;
    for (std::size_t i = 1; i + 1 < m; ++i) {
      if (std::isinf(dist[order[i]])) continue;
      dist[order[i]] += (pop[front[order[i + 1]]].objectives[k] -
                         pop[front[order[i - 1]]].objectives[k]) /
                        (hi - lo);
    }
  }
  return dist;
}

/// One-point crossover. Genomes shorter than 2 are copied unchanged.
inline std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, SplitMix64& rng) {
  if (a.size() != b.size()) throw std::invalid_argument("crossover: genome lengths differ");
  Genome c1 = a, c2 = b;
  if (a.size() < 2) return {c1, c2};
  const auto cut = static_cast<std::ptrdiff_t>(1 + rng.below(a.size() - 1));
  std::copy(b.begin() + cut, b.end(), c1.begin() + cut);
  std::copy(a.begin() + cut, a.end(), c2.begin() + cut);
  return {c1, c2};
}

inline std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Seed seed) {
  SplitMix64 rng(seed);
  return crossover(a, b, rng);
}

/// Resamples each gene uniformly from [0, num_alleles) with probability `rate`.
inline Genome mutate(Genome g, double rate, std::size_t num_alleles, SplitMix64& rng) {
  if (num_alleles == 0) throw std::invalid_argument("mutate: no alleles");
  for (auto& gene : g)
    if (rng.uniform() < rate) gene = static_cast<Action>(rng.below(num_alleles));
  return g;
}

inline Genome mutate(const Genome& g, double rate, std::size_t num_alleles, Seed seed) {
  SplitMix64 rng(seed);
  return mutate(g, rate, num_alleles, rng);
}

inline std::string to_string(const Genome& g) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < g.size(); ++i) os << (i ? "," : "") << int(g[i]);
  os << ']';
  return os.str();
}

template <class P>
concept MooProblem = requires(P& p, const Genome& g, std::size_t n, SplitMix64& rng) {
  { p.genome_length() } -> std::convertible_to<std::size_t>;
  { p.num_alleles() } -> std::convertible_to<std::size_t>;
  { p.initial_population(n, rng) } -> std::same_as<std::vector<Genome>>;
  { p.evaluate(g) } -> std::same_as<Evaluation>;
};

struct EvolveResult {
  std::vector<Individual> population;
  // Every distinct feasible genome evaluated, in order of first evaluation.
  std::vector<Individual> archive;
  std::size_t evaluations = 0;
};

namespace detail {

inline void assign_rank_and_crowding(std::vector<Individual>& pop) {
  const auto fronts = nondominated_sort(pop);
  for (std::size_t r = 0; r < fronts.size(); ++r) {
    const auto cd = crowding_distance(pop, fronts[r]);
    for (std::size_t i = 0; i < fronts[r].size(); ++i) {
      pop[fronts[r][i]].rank = r;
      pop[fronts[r][i]].crowding = cd[i];
    }
  }
}

inline bool better_in_tournament(const Individual& a, const Individual& b) {
  if (a.rank != b.rank) return a.rank < b.rank;
  return a.crowding > b.crowding;
}

} // namespace detail

/// Elitist NSGA-II generational loop over fixed-length discrete genomes.
/// Evaluations are memoized per genome, so `problem.evaluate` must be a pure
/// function of the genome.
template <MooProblem Problem>
EvolveResult evolve(Problem& problem, const MooConfig& config) {
  config.validate();
  const std::size_t n = config.population;
  const std::size_t k = problem.genome_length();
  const std::size_t alleles = problem.num_alleles();
  const double mutation_rate = config.effective_mutation_rate(k);
  SplitMix64 rng(derive_seed({config.seed, 0x6E73'6761ULL}));

  EvolveResult result;
  std::map<Genome, Evaluation> cache;

  auto evaluate = [&](const Genome& g) -> Individual {
    if (g.size() != k) throw std::invalid_argument("genome " + to_string(g) + " has wrong length");
    auto it = cache.find(g);
    if (it == cache.end()) {
      Evaluation e;
      try {
        e = problem.evaluate(g);
      } catch (const std::exception& ex) {
        throw std::runtime_error("evaluation failed for genome " + to_string(g) + ": " + ex.what());
      }
      it = cache.emplace(g, std::move(e)).first;
      ++result.evaluations;
      if (it->second.violation <= 0.0)
        result.archive.push_back({g, it->second.objectives, it->second.violation, 0, 0.0});
    }
    return Individual{g, it->second.objectives, it->second.violation, 0, 0.0};
  };

  auto initial = problem.initial_population(n, rng);
  if (initial.size() != n) throw std::logic_error("initial population has wrong size");
  std::vector<Individual> pop;
  pop.reserve(2 * n);
  for (const auto& g : initial) pop.push_back(evaluate(g));
  detail::assign_rank_and_crowding(pop);

  auto tournament = [&]() -> const Individual& {
    const Individual* best = &pop[rng.below(pop.size())];
    for (std::size_t t = 1; t < config.tournament_size; ++t) {
      const Individual& c = pop[rng.below(pop.size())];
      if (detail::better_in_tournament(c, *best)) best = &c;
    }
    return *best;
  };

  for (std::size_t gen = 0; gen < config.generations; ++gen) {
    std::vector<Individual> children;
    children.reserve(n);
    while (children.size() < n) {
      const Genome& pa = tournament().genome;
      const Genome& pb = tournament().genome;
      auto [c1, c2] = rng.uniform() < config.crossover_rate ? crossover(pa, pb, rng)
                                                              : std::pair{pa, pb};
      for (Genome* c : {&c1, &c2}) {
        *c = mutate(std::move(*c), mutation_rate, alleles, rng);
        for (std::size_t r = 0; r < config.novelty_retries && cache.contains(*c); ++r)
          *c = mutate(std::move(*c), mutation_rate, alleles, rng);
        if (children.size() < n) children.push_back(evaluate(*c));
      }
    }

    std::vector<Individual> merged = std::move(pop);
    merged.insert(merged.end(), std::make_move_iterator(children.begin()),
                  std::make_move_iterator(children.end()));
    const auto fronts = nondominated_sort(merged);

    std::vector<Individual> next;
    next.reserve(2 * n);
    for (std::size_t r = 0; r < fronts.size() && next.size() < n; ++r) {
      const auto& front = fronts[r];
      const auto cd = crowding_distance(merged, front);
      std::vector<std::size_t> order(front.size());
      std::iota(order.begin(), order.end(), 0);
      if (next.size() + front.size() > n)
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return cd[a] > cd[b]; });
      for (auto i : order) {
        if (next.size() >= n) break;
        Individual ind = merged[front[i]];
        ind.rank = r;
        ind.crowding = cd[i];
        next.push_back(std::move(ind));
      }
    }
    pop = std::move(next);
  }

  result.population = std::move(pop);
  return result;
}

} // namespace sgrl
