#pragma once

#include "sgrl/core.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgrl {

struct FrozenLakeConfig {
  int rows = 5;
  int cols = 5;
  Cell start{0, 0};
  Cell goal{4, 4};
  std::vector<Cell> frozen{{0, 2}, {1, 1}, {1, 3}, {2, 3}, {3, 1}, {3, 3}};
  // Slip model on frozen cells; the remainder is split evenly between the two
  // perpendicular directions.
  double intended_prob = 0.6;
  double step_reward = -1.0;
  double goal_reward = 10.0;
};

struct FrozenLakeState {
  Cell agent;
  bool done = false;

  bool operator==(const FrozenLakeState&) const = default;

  std::string key() const {
    return "f" + std::to_string(agent.row) + "," + std::to_string(agent.col) + ";" +
           (done ? "1" : "0");
  }
};

class FrozenLake {
public:
  using State = FrozenLakeState;

  enum : Action { kUp = 0, kDown, kLeft, kRight, kExit };
  static constexpr std::size_t kNumActions = 5;
  static constexpr std::array<const char*, kNumActions> kActionNames{"UP", "DOWN", "LEFT",
                                                                     "RIGHT", "EXIT"};

  FrozenLake() : FrozenLake(FrozenLakeConfig{}) {}

  explicit FrozenLake(FrozenLakeConfig config) : config_(std::move(config)) {
    if (config_.rows <= 0 || config_.cols <= 0)
      throw std::invalid_argument("frozen lake: grid must be non-empty");
    if (!in_bounds(config_.start) || !in_bounds(config_.goal))
      throw std::invalid_argument("frozen lake: start or goal off-grid");
    for (auto c : config_.frozen)
      if (!in_bounds(c)) throw std::invalid_argument("frozen lake: frozen cell off-grid");
    if (config_.intended_prob < 0.0 || config_.intended_prob > 1.0)
      throw std::invalid_argument("frozen lake: intended_prob outside [0,1]");
  }

  const FrozenLakeConfig& config() const noexcept { return config_; }
  std::string name() const { return "frozen_lake"; }
  std::size_t num_actions() const noexcept { return kNumActions; }
  static std::string action_name(Action a) {
    return a < kNumActions ? kActionNames[a] : "?";
  }

  State reset(Seed /*seed*/) const { return State{config_.start, false}; }
  bool is_terminal(const State& s) const noexcept { return s.done; }

  bool in_bounds(Cell c) const noexcept {
    return c.row >= 0 && c.row < config_.rows && c.col >= 0 && c.col < config_.cols;
  }

  bool is_frozen(Cell c) const noexcept {
    return std::find(config_.frozen.begin(), config_.frozen.end(), c) != config_.frozen.end();
  }

  std::vector<Outcome<State>> transitions(const State& s, Action a) const {
    std::vector<Outcome<State>> out;
    for (const auto& [dir, p] : branches(s, a)) {
      if (p <= 0.0) continue;
      const State next = apply(s, a, dir);
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const auto& o) { return o.next_state == next; });
      if (it == out.end())
        out.push_back({next, p});
      else
        it->prob += p;
    }
    return out;
  }

  Transition<State> step(const State& s, Action a, Seed step_seed) const {
    const auto br = branches(s, a);
    SplitMix64 rng(step_seed);
    const double u = rng.uniform();
    double acc = 0.0;
    Action dir = br.back().first;
    for (const auto& [d, p] : br) {
      acc += p;
      if (u < acc) {
        dir = d;
        break;
      }
    }
    const State next = apply(s, a, dir);
    const bool exited = next.done;
    return {next, exited ? config_.goal_reward : config_.step_reward, exited,
            transition_prob(*this, s, a, next)};
  }

  FeatureVector encode_features(const State& s) const {
    return {static_cast<double>(s.agent.row), static_cast<double>(s.agent.col)};
  }

  std::vector<std::pair<int, int>> feature_bounds() const {
    return {{0, config_.rows - 1}, {0, config_.cols - 1}};
  }

  std::optional<State> decode_features(const FeatureVector& x) const {
    if (x.size() != 2) return std::nullopt;
    State s{{static_cast<int>(std::lround(x[0])), static_cast<int>(std::lround(x[1]))}, false};
    if (!in_bounds(s.agent)) return std::nullopt;
    return s;
  }

  std::string render(const State& s) const {
    std::string out;
    for (int r = 0; r < config_.rows; ++r) {
      for (int c = 0; c < config_.cols; ++c) {
        const Cell cell{r, c};
        char ch = is_frozen(cell) ? '*' : '.';
        if (cell == config_.goal) ch = 'G';
        if (cell == s.agent) ch = 'A';
        out += ch;
      }
      out += '\n';
    }
    return out;
  }

private:
  static Cell moved(Cell c, Action dir) noexcept {
    switch (dir) {
      case kUp: return {c.row - 1, c.col};
      case kDown: return {c.row + 1, c.col};
      case kLeft: return {c.row, c.col - 1};
      case kRight: return {c.row, c.col + 1};
      default: return c;
    }
  }

  // (realized direction, probability) pairs; EXIT and non-frozen cells are
  // deterministic.
  std::vector<std::pair<Action, double>> branches(const State& s, Action a) const {
    if (s.done) throw std::logic_error("frozen lake: step on terminal state");
    if (a >= kNumActions) throw std::invalid_argument("frozen lake: action out of range");
    if (a == kExit || !is_frozen(s.agent)) return {{a, 1.0}};
    const double side = (1.0 - config_.intended_prob) / 2.0;
    if (a == kUp || a == kDown) return {{a, config_.intended_prob}, {kLeft, side}, {kRight, side}};
    return {{a, config_.intended_prob}, {kUp, side}, {kDown, side}};
  }

  State apply(const State& s, Action a, Action dir) const {
    State next = s;
    if (a == kExit) {
      next.done = s.agent == config_.goal;
      return next;
    }
    const Cell target = moved(s.agent, dir);
    if (in_bounds(target)) next.agent = target;
    return next;
  }

  FrozenLakeConfig config_;
};

} // namespace sgrl
