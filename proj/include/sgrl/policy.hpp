#pragma once

#include "sgrl/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgrl {

/// Black-box policy surface: Q-values per action. The greedy policy and its
/// softmax distribution are derived from these.
template <class State>
class QFunction {
public:
  virtual ~QFunction() = default;
  virtual std::size_t num_actions() const = 0;
  virtual std::vector<double> q_values(const State& s) const = 0;
};

/// Numerically stable softmax (temperature 1).
inline std::vector<double> softmax(std::span<const double> q) {
  if (q.empty()) throw std::invalid_argument("softmax of empty vector");
  const double hi = *std::max_element(q.begin(), q.end());
  std::vector<double> p(q.size());
  double z = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) z += (p[i] = std::exp(q[i] - hi));
  for (auto& v : p) v /= z;
  return p;
}

/// Argmax with the lowest index winning ties.
inline Action argmax_action(std::span<const double> q) {
  if (q.empty()) throw std::invalid_argument("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = i;
  return static_cast<Action>(best);
}

template <class State>
std::vector<double> action_distribution(const QFunction<State>& q, const State& s) {
  const auto v = q.q_values(s);
  return softmax(v);
}

template <class State>
Action greedy_action(const QFunction<State>& q, const State& s) {
  const auto v = q.q_values(s);
  return argmax_action(v);
}

/// Tabular Q-function keyed by canonical state keys; unseen states read as
/// all-zero rows.
template <class State>
class QTable final : public QFunction<State> {
public:
  explicit QTable(std::size_t num_actions) : num_actions_(num_actions) {
    if (num_actions == 0) throw std::invalid_argument("QTable needs at least one action");
  }

  std::size_t num_actions() const override { return num_actions_; }

  std::vector<double> q_values(const State& s) const override {
    auto it = table_.find(s.key());
    return it == table_.end() ? std::vector<double>(num_actions_, 0.0) : it->second;
  }

  std::vector<double>& row(const State& s) {
    auto [it, inserted] = table_.try_emplace(s.key(), num_actions_, 0.0);
    return it->second;
  }

  void set(const std::string& key, std::vector<double> values) {
    if (values.size() != num_actions_)
      throw std::invalid_argument("QTable row has " + std::to_string(values.size()) +
                                  " entries, expected " + std::to_string(num_actions_));
    table_[key] = std::move(values);
  }

  const std::map<std::string, std::vector<double>>& entries() const noexcept { return table_; }
  std::size_t size() const noexcept { return table_.size(); }

  bool operator==(const QTable& other) const {
    return num_actions_ == other.num_actions_ && table_ == other.table_;
  }

private:
  std::size_t num_actions_;
  std::map<std::string, std::vector<double>> table_;
};

/// Q-function given by a callable; handy for hand-built policies.
template <class State, class Fn>
class LambdaQFunction final : public QFunction<State> {
public:
  LambdaQFunction(std::size_t num_actions, Fn fn) : num_actions_(num_actions), fn_(std::move(fn)) {}
  std::size_t num_actions() const override { return num_actions_; }
  std::vector<double> q_values(const State& s) const override { return fn_(s); }

private:
  std::size_t num_actions_;
  Fn fn_;
};

struct TrainingConfig {
  std::size_t steps = 300'000;
  double learning_rate = 0.1;
  double discount = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  // Linear decay length; the default covers the first half of training.
  std::size_t epsilon_decay_steps = 150'000;
  std::size_t max_episode_steps = 50;
  // Probability that an episode starts from a uniformly drawn valid state
  // instead of the reset state. Needs a PerturbableEnvironment.
  double exploring_start_prob = 0.5;
  Seed seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
      throw std::invalid_argument("learning_rate must be in (0,1]");
    if (discount < 0.0 || discount > 1.0) throw std::invalid_argument("discount must be in [0,1]");
    if (max_episode_steps == 0) throw std::invalid_argument("max_episode_steps must be >= 1");
    if (exploring_start_prob < 0.0 || exploring_start_prob > 1.0)
      throw std::invalid_argument("exploring_start_prob must be in [0,1]");
  }

  double epsilon_at(std::size_t t) const noexcept {
    if (epsilon_decay_steps == 0 || t >= epsilon_decay_steps) return epsilon_end;
    const double frac = static_cast<double>(t) / static_cast<double>(epsilon_decay_steps);
    return epsilon_start + (epsilon_end - epsilon_start) * frac;
  }
};

/// Uniformly drawn non-terminal state (rejection sampling over the feature
/// box); falls back to the reset state.
template <Environment Env>
typename Env::State random_state(const Env& env, SplitMix64& rng) {
  if constexpr (PerturbableEnvironment<Env>) {
    const auto bounds = env.feature_bounds();
    FeatureVector x(bounds.size());
    for (int attempt = 0; attempt < 1000; ++attempt) {
      for (std::size_t i = 0; i < bounds.size(); ++i)
        x[i] = bounds[i].first + static_cast<double>(rng.below(bounds[i].second - bounds[i].first + 1));
      if (auto s = env.decode_features(x); s && !env.is_terminal(*s)) return *s;
    }
  }
  return env.reset(rng());
}

/// One-step tabular Q-learning with epsilon-greedy exploration. Episodes are
/// truncated (bootstrapped) at max_episode_steps.
template <Environment Env>
QTable<typename Env::State> train(const Env& env, const TrainingConfig& config) {
  config.validate();
  using State = typename Env::State;
  const std::size_t n_actions = env.num_actions();
  QTable<State> table(n_actions);
  SplitMix64 rng(derive_seed({config.seed, 0x7472'6169'6EULL}));

  std::size_t episode = 0;
  auto episode_start = [&] {
    SplitMix64 start_rng(derive_seed({config.seed, 0x5747ULL, episode}));
    if (start_rng.uniform() < config.exploring_start_prob) return random_state(env, start_rng);
    return env.reset(derive_seed({config.seed, episode}));
  };
  State s = episode_start();
  std::size_t t_in_episode = 0;
  for (std::size_t t = 0; t < config.steps; ++t) {
    Action a;
    if (rng.uniform() < config.epsilon_at(t)) {
      a = static_cast<Action>(rng.below(n_actions));
    } else {
      a = argmax_action(table.q_values(s));
    }
    const auto tr = env.step(s, a, rng());
    double target = tr.reward;
    if (!tr.terminal) {
      const auto next_q = table.q_values(tr.next_state);
      target += config.discount * *std::max_element(next_q.begin(), next_q.end());
    }
    auto& q = table.row(s);
    q[a] += config.learning_rate * (target - q[a]);

    ++t_in_episode;
    if (tr.terminal || t_in_episode >= config.max_episode_steps) {
      ++episode;
      s = episode_start();
      t_in_episode = 0;
    } else {
      s = tr.next_state;
    }
  }
  return table;
}

/// Text format: a header line `qtable <num_actions>` followed by one
/// `<state key> <q_0> ... <q_{n-1}>` line per visited state.
template <class State>
void write_qtable(std::ostream& os, const QTable<State>& table) {
  os << "qtable " << table.num_actions() << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& [key, values] : table.entries()) {
    os << key;
    for (double v : values) os << ' ' << v;
    os << '\n';
  }
}

template <class State>
QTable<State> read_qtable(std::istream& is) {
  std::string magic;
  std::size_t n = 0;
  if (!(is >> magic >> n) || magic != "qtable" || n == 0)
    throw std::runtime_error("not a Q-table file");
  QTable<State> table(n);
  std::string line;
  std::getline(is, line);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::vector<double> values(n);
    for (auto& v : values)
      if (!(ls >> v)) throw std::runtime_error("Q-table line " + std::to_string(lineno) + " is short");
    table.set(key, std::move(values));
  }
  return table;
}

template <class State>
void save_qtable(const std::string& path, const QTable<State>& table) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_qtable(os, table);
}

template <class State>
QTable<State> load_qtable(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_qtable<State>(is);
}

} // namespace sgrl
