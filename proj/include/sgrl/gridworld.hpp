#pragma once

#include "sgrl/core.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgrl {

enum class ObstacleKind : std::uint8_t { Tree, Wall };

struct Obstacle {
  Cell cell;
  ObstacleKind kind = ObstacleKind::Tree;
  bool operator==(const Obstacle&) const = default;
};

struct GridworldConfig {
  int rows = 5;
  int cols = 5;
  Cell start{0, 0};
  Cell dragon{4, 4};
  // Trees guard the dragon's row and column; walls block the long approaches.
  std::vector<Obstacle> obstacles{{{4, 3}, ObstacleKind::Tree},
                                  {{3, 4}, ObstacleKind::Tree},
                                  {{4, 1}, ObstacleKind::Wall},
                                  {{1, 4}, ObstacleKind::Wall}};
  double step_reward = -1.0;
  double chop_tree_reward = -2.0;
  double chop_wall_reward = -5.0;
  double wasted_action_reward = -3.0;
  double shoot_reward = 50.0;
  double tree_regrow_prob = 0.05;
  double wall_rebuild_prob = 0.02;
};

struct GridworldState {
  Cell agent;
  Cell dragon;
  // Bit i set <=> obstacle i of the layout is PRESENT.
  std::uint32_t present = 0;
  bool done = false;

  bool operator==(const GridworldState&) const = default;

  bool obstacle_present(std::size_t i) const noexcept { return (present >> i) & 1U; }

  std::string key() const {
    std::string k = "g";
    k += std::to_string(agent.row) + "," + std::to_string(agent.col) + ";";
    k += std::to_string(dragon.row) + "," + std::to_string(dragon.col) + ";";
    k += std::to_string(present) + ";" + (done ? "1" : "0");
    return k;
  }
};

class Gridworld {
public:
  using State = GridworldState;

  enum : Action { kUp = 0, kDown, kLeft, kRight, kChop, kShoot };
  static constexpr std::size_t kNumActions = 6;
  static constexpr std::array<const char*, kNumActions> kActionNames{
      "UP", "DOWN", "LEFT", "RIGHT", "CHOP", "SHOOT"};

  Gridworld() : Gridworld(GridworldConfig{}) {}

  explicit Gridworld(GridworldConfig config) : config_(std::move(config)) {
    if (config_.rows <= 0 || config_.cols <= 0)
      throw std::invalid_argument("gridworld: grid must be non-empty");
    if (config_.obstacles.size() > 32)
      throw std::invalid_argument("gridworld: at most 32 obstacles supported");
    if (!in_bounds(config_.start) || !in_bounds(config_.dragon))
      throw std::invalid_argument("gridworld: start or dragon off-grid");
    for (const auto& o : config_.obstacles) {
      if (!in_bounds(o.cell)) throw std::invalid_argument("gridworld: obstacle off-grid");
      if (o.cell == config_.start || o.cell == config_.dragon)
        throw std::invalid_argument("gridworld: obstacle overlaps start or dragon");
    }
    for (auto p : {config_.tree_regrow_prob, config_.wall_rebuild_prob})
      if (p < 0.0 || p > 1.0) throw std::invalid_argument("gridworld: probability outside [0,1]");
  }

  const GridworldConfig& config() const noexcept { return config_; }
  std::string name() const { return "gridworld"; }
  std::size_t num_actions() const noexcept { return kNumActions; }
  static std::string action_name(Action a) {
    return a < kNumActions ? kActionNames[a] : "?";
  }

  State reset(Seed /*seed*/) const {
    State s;
    s.agent = config_.start;
    s.dragon = config_.dragon;
    s.present = all_present_mask();
    return s;
  }

  bool is_terminal(const State& s) const noexcept { return s.done; }

  bool in_bounds(Cell c) const noexcept {
    return c.row >= 0 && c.row < config_.rows && c.col >= 0 && c.col < config_.cols;
  }

  std::optional<std::size_t> obstacle_at(Cell c) const noexcept {
    for (std::size_t i = 0; i < config_.obstacles.size(); ++i)
      if (config_.obstacles[i].cell == c) return i;
    return std::nullopt;
  }

  bool blocked(const State& s, Cell c) const noexcept {
    auto idx = obstacle_at(c);
    return idx && s.obstacle_present(*idx);
  }

  /// Agent and dragon share a row or column with no PRESENT obstacle strictly
  /// between them.
  bool shoot_effective(const State& s) const noexcept {
    const Cell a = s.agent, d = s.dragon;
    if (a.row != d.row && a.col != d.col) return false;
    if (a == d) return true;
    const int dr = (d.row > a.row) - (d.row < a.row);
    const int dc = (d.col > a.col) - (d.col < a.col);
    for (Cell c{a.row + dr, a.col + dc}; c != d; c = {c.row + dr, c.col + dc})
      if (blocked(s, c)) return false;
    return true;
  }

  std::vector<Outcome<State>> transitions(const State& s, Action a) const {
    auto det = deterministic_part(s, a);
    std::vector<Outcome<State>> out;
    const auto eligible = regrowth_candidates(det.state, det.chopped);
    const std::size_t m = eligible.size();
    out.reserve(std::size_t{1} << m);
    for (std::uint32_t combo = 0; combo < (1U << m); ++combo) {
      State next = det.state;
      double p = 1.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double pj = regrow_prob(eligible[j]);
        if ((combo >> j) & 1U) {
          next.present |= (1U << eligible[j]);
          p *= pj;
        } else {
          p *= 1.0 - pj;
        }
      }
      if (p > 0.0) out.push_back({next, p});
    }
    return out;
  }

  Transition<State> step(const State& s, Action a, Seed step_seed) const {
    auto det = deterministic_part(s, a);
    SplitMix64 rng(step_seed);
    State next = det.state;
    double p = 1.0;
    for (auto idx : regrowth_candidates(det.state, det.chopped)) {
      const double pj = regrow_prob(idx);
      if (rng.uniform() < pj) {
        next.present |= (1U << idx);
        p *= pj;
      } else {
        p *= 1.0 - pj;
      }
    }
    return {next, det.reward, next.done, p};
  }

  /// [agent_row, agent_col, dragon_row, dragon_col, one flag per obstacle].
  FeatureVector encode_features(const State& s) const {
    FeatureVector x{static_cast<double>(s.agent.row), static_cast<double>(s.agent.col),
                    static_cast<double>(s.dragon.row), static_cast<double>(s.dragon.col)};
    for (std::size_t i = 0; i < config_.obstacles.size(); ++i)
      x.push_back(s.obstacle_present(i) ? 1.0 : 0.0);
    return x;
  }

  std::vector<std::pair<int, int>> feature_bounds() const {
    std::vector<std::pair<int, int>> b{{0, config_.rows - 1},
                                       {0, config_.cols - 1},
                                       {config_.dragon.row, config_.dragon.row},
                                       {config_.dragon.col, config_.dragon.col}};
    b.resize(4 + config_.obstacles.size(), {0, 1});
    return b;
  }

  /// Rebuilds a non-terminal state from features. The dragon is fixed by the
  /// layout; agents off-grid or on a PRESENT obstacle have no valid state.
  std::optional<State> decode_features(const FeatureVector& x) const {
    if (x.size() != 4 + config_.obstacles.size()) return std::nullopt;
    State s;
    s.agent = {static_cast<int>(std::lround(x[0])), static_cast<int>(std::lround(x[1]))};
    s.dragon = {static_cast<int>(std::lround(x[2])), static_cast<int>(std::lround(x[3]))};
    if (!in_bounds(s.agent) || s.dragon != config_.dragon || s.agent == s.dragon)
      return std::nullopt;
    for (std::size_t i = 0; i < config_.obstacles.size(); ++i) {
      const long v = std::lround(x[4 + i]);
      if (v != 0 && v != 1) return std::nullopt;
      if (v == 1) s.present |= (1U << i);
    }
    if (blocked(s, s.agent)) return std::nullopt;
    return s;
  }

  std::string render(const State& s) const {
    std::string out;
    for (int r = 0; r < config_.rows; ++r) {
      for (int c = 0; c < config_.cols; ++c) {
        const Cell cell{r, c};
        char ch = '.';
        if (auto idx = obstacle_at(cell)) {
          const bool tree = config_.obstacles[*idx].kind == ObstacleKind::Tree;
          ch = s.obstacle_present(*idx) ? (tree ? 'T' : 'W') : (tree ? 't' : 'w');
        }
        if (cell == s.dragon) ch = 'D';
        if (cell == s.agent) ch = 'A';
        out += ch;
      }
      out += '\n';
    }
    return out;
  }

  std::uint32_t all_present_mask() const noexcept {
    const auto n = config_.obstacles.size();
    return n == 32 ? 0xFFFFFFFFU : ((1U << n) - 1U);
  }

private:
  struct Deterministic {
    State state;
    double reward = 0.0;
    std::optional<std::size_t> chopped;
  };

  static Cell moved(Cell c, Action a) noexcept {
    switch (a) {
      case kUp: return {c.row - 1, c.col};
      case kDown: return {c.row + 1, c.col};
      case kLeft: return {c.row, c.col - 1};
      case kRight: return {c.row, c.col + 1};
      default: return c;
    }
  }

  Deterministic deterministic_part(const State& s, Action a) const {
    if (s.done) throw std::logic_error("gridworld: step on terminal state");
    if (a >= kNumActions) throw std::invalid_argument("gridworld: action out of range");
    Deterministic d{s, config_.step_reward, std::nullopt};
    if (a <= kRight) {
      const Cell target = moved(s.agent, a);
      if (in_bounds(target) && !blocked(s, target) && target != s.dragon) d.state.agent = target;
    } else if (a == kChop) {
      // Adjacent trees are chopped before walls; ties go UP, DOWN, LEFT, RIGHT.
      for (auto kind : {ObstacleKind::Tree, ObstacleKind::Wall}) {
        if (d.chopped) break;
        for (Action dir = kUp; dir <= kRight; ++dir) {
          auto idx = obstacle_at(moved(s.agent, dir));
          if (idx && s.obstacle_present(*idx) && config_.obstacles[*idx].kind == kind) {
            d.chopped = idx;
            break;
          }
        }
      }
      if (d.chopped) {
        d.state.present &= ~(1U << *d.chopped);
        d.reward = config_.obstacles[*d.chopped].kind == ObstacleKind::Tree
                       ? config_.chop_tree_reward
                       : config_.chop_wall_reward;
      } else {
        d.reward = config_.wasted_action_reward;
      }
    } else {
      if (shoot_effective(s)) {
        d.state.done = true;
        d.reward = config_.shoot_reward;
      } else {
        d.reward = config_.wasted_action_reward;
      }
    }
    return d;
  }

  // Removed obstacles that may regrow this step: not the one just chopped and
  // not under the agent. None after the episode ends.
  std::vector<std::size_t> regrowth_candidates(const State& after,
                                               std::optional<std::size_t> chopped) const {
    std::vector<std::size_t> idx;
    if (after.done) return idx;
    for (std::size_t i = 0; i < config_.obstacles.size(); ++i) {
      if (after.obstacle_present(i) || (chopped && *chopped == i)) continue;
      if (config_.obstacles[i].cell == after.agent) continue;
      if (regrow_prob(i) <= 0.0) continue;
      idx.push_back(i);
    }
    return idx;
  }

  double regrow_prob(std::size_t i) const noexcept {
    return config_.obstacles[i].kind == ObstacleKind::Tree ? config_.tree_regrow_prob
                                                           : config_.wall_rebuild_prob;
  }

  GridworldConfig config_;
};

} // namespace sgrl
