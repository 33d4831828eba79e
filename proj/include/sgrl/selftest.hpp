#pragma once

// Acceptance checks with their own brute-force or analytic oracles. Shared by
// the `sgrl selftest` command and the acceptance test binary.

#include "sgrl/core.hpp"
#include "sgrl/frozen_lake.hpp"
#include "sgrl/generators.hpp"
#include "sgrl/gridworld.hpp"
#include "sgrl/harness.hpp"
#include "sgrl/nsga2.hpp"
#include "sgrl/policy.hpp"
#include "sgrl/properties.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace sgrl::selftest {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

// Tolerances and sizes pinned by the acceptance criteria.
inline constexpr double kFidelityTolerance = 1e-12;
inline constexpr double kSuTolerance = 0.05;
inline constexpr std::size_t kSuSamples = 1000;
inline constexpr std::size_t kSuTrials = 100;
inline constexpr std::size_t kSuRequired = 95;
inline constexpr double kEnumerationSeconds = 5.0;
inline constexpr double kEvaluateSeconds = 600.0;

/// Linear chain 0 -> 1 -> ... -> n. Action 0 advances with the per-state
/// probability and stays otherwise; action 1 always stays. Nothing is
/// terminal.
struct ChainState {
  int pos = 0;
  bool operator==(const ChainState&) const = default;
  std::string key() const { return "c" + std::to_string(pos); }
};

class ChainEnv {
public:
  using State = ChainState;

  explicit ChainEnv(std::vector<double> advance_prob) : p_(std::move(advance_prob)) {}

  std::string name() const { return "chain"; }
  std::size_t num_actions() const noexcept { return 2; }
  State reset(Seed) const { return {0}; }
  bool is_terminal(const State&) const noexcept { return false; }

  std::vector<Outcome<State>> transitions(const State& s, Action a) const {
    const double p = advance_prob(s, a);
    std::vector<Outcome<State>> out;
    if (p > 0.0) out.push_back({{s.pos + 1}, p});
    if (p < 1.0) out.push_back({s, 1.0 - p});
    return out;
  }

  Transition<State> step(const State& s, Action a, Seed seed) const {
    const double p = advance_prob(s, a);
    SplitMix64 rng(seed);
    const bool moved = rng.uniform() < p;
    return {moved ? State{s.pos + 1} : s, 0.0, false, moved ? p : 1.0 - p};
  }

  FeatureVector encode_features(const State& s) const { return {static_cast<double>(s.pos)}; }

private:
  double advance_prob(const State& s, Action a) const {
    if (a != 0 || s.pos < 0 || static_cast<std::size_t>(s.pos) >= p_.size()) return 0.0;
    return p_[static_cast<std::size_t>(s.pos)];
  }
  std::vector<double> p_;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Independent constrained dominance for minimization.
inline bool oracle_dominates(const Individual& a, const Individual& b) {
  const bool fa = a.violation <= 0.0, fb = b.violation <= 0.0;
  if (fa != fb) return fa;
  if (!fa) return a.violation < b.violation;
  bool better = false;
  for (std::size_t i = 0; i < a.objectives.size(); ++i) {
    if (a.objectives[i] > b.objectives[i]) return false;
    better = better || a.objectives[i] < b.objectives[i];
  }
  return better;
}

/// Repeatedly peels the set of members nobody remaining dominates.
inline std::vector<std::vector<std::size_t>> brute_force_fronts(const std::vector<Individual>& pop) {
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<bool> taken(pop.size(), false);
  std::size_t left = pop.size();
  while (left > 0) {
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      if (taken[i]) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < pop.size() && !dominated; ++j)
        dominated = !taken[j] && j != i && oracle_dominates(pop[j], pop[i]);
      if (!dominated) front.push_back(i);
    }
    for (auto i : front) taken[i] = true;
    left -= front.size();
    fronts.push_back(std::move(front));
  }
  return fronts;
}

inline std::vector<double> oracle_softmax(const std::vector<double>& q) {
  const double hi = *std::max_element(q.begin(), q.end());
  std::vector<double> p(q.size());
  double z = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) z += (p[i] = std::exp(q[i] - hi));
  for (auto& v : p) v /= z;
  return p;
}

struct OracleCandidate {
  std::string key;
  std::array<double, 4> objectives{};
  std::vector<Action> actions;
};

/// Every k-action sequence from `start` in a deterministic environment;
/// candidates collected, scored and reduced to a Pareto front without the
/// search machinery.
template <Environment Env>
std::vector<OracleCandidate> enumerated_front(const Env& env, const QFunction<typename Env::State>& q,
                                              const typename Env::State& factual,
                                              const typename Env::State& start, std::size_t k) {
  using State = typename Env::State;
  const auto outcome = argmax_action(q.q_values(factual));
  const auto fx = env.encode_features(factual);
  std::map<std::string, OracleCandidate> best;
  const std::size_t n = env.num_actions();
  std::size_t total = 1;
  for (std::size_t i = 0; i < k; ++i) total *= n;
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<Action> seq(k);
    for (std::size_t i = 0, c = code; i < k; ++i, c /= n) seq[k - 1 - i] = static_cast<Action>(c % n);
    State s = start;
    double stay = 1.0;
    for (std::size_t len = 1; len <= k; ++len) {
      if (env.is_terminal(s)) break;
      stay *= oracle_softmax(q.q_values(s))[seq[len - 1]];
      s = env.step(s, seq[len - 1], 0).next_state;
      if (env.is_terminal(s) || argmax_action(q.q_values(s)) != outcome) continue;
      const auto x = env.encode_features(s);
      double d = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - fx[i]) * (x[i] - fx[i]);
      if (d == 0.0) continue;
      OracleCandidate c{s.key(),
                        {double(len) / double(k), 1.0, 1.0 - stay, 1.0},
                        {seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(len)}};
      auto it = best.find(c.key);
      if (it == best.end() || std::tie(c.objectives, c.actions) <
                                  std::tie(it->second.objectives, it->second.actions))
        best[c.key] = c;
    }
  }
  std::vector<OracleCandidate> front;
  for (const auto& [key, c] : best) {
    bool dominated = false;
    for (const auto& [k2, d] : best) {
      bool le = true, lt = false;
      for (std::size_t i = 0; i < 4; ++i) {
        le = le && d.objectives[i] <= c.objectives[i];
        lt = lt || d.objectives[i] < c.objectives[i];
      }
      if (le && lt) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(c);
  }
  std::sort(front.begin(), front.end(), [](const auto& a, const auto& b) {
    return std::tie(a.objectives, a.key) < std::tie(b.objectives, b.key);
  });
  return front;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Stand-alone checks

inline CheckResult check_nondominated_sort(Seed seed = 1) {
  CheckResult r{2, "nondominated_sort matches brute-force dominance partition", true, ""};
  SplitMix64 rng(seed);
  for (int trial = 0; trial < 100 && r.passed; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<Individual> pop(n);
    for (auto& ind : pop) {
      // Small integer grid so ties and duplicates occur.
      for (int j = 0; j < 4; ++j) ind.objectives.push_back(static_cast<double>(rng.below(5)));
      ind.violation = rng.uniform() < 0.3 ? static_cast<double>(1 + rng.below(3)) : 0.0;
    }
    auto got = nondominated_sort(pop);
    auto want = detail::brute_force_fronts(pop);
    for (auto& f : got) std::sort(f.begin(), f.end());
    if (got != want) {
      r.passed = false;
      r.detail = "population " + std::to_string(trial) + " (n=" + std::to_string(n) + ") differs";
    }
  }
  if (r.passed) r.detail = "100 populations";
  return r;
}

inline CheckResult check_advance_enumeration(Seed seed = 1) {
  CheckResult r{3, "deterministic Gridworld k=2: Advance front equals 36-sequence enumeration", true, ""};
  const auto t0 = std::chrono::steady_clock::now();
  GridworldConfig cfg;
  cfg.tree_regrow_prob = 0.0;
  cfg.wall_rebuild_prob = 0.0;
  const Gridworld env(cfg);
  TrainingConfig tc;
  tc.steps = 100'000;
  tc.epsilon_decay_steps = 50'000;
  tc.seed = seed;
  const auto q = train(env, tc);

  // Factual trajectory: epsilon-greedy walk from the start.
  SplitMix64 rng(derive_seed({seed, 0x3E4ULL}));
  Trajectory<GridworldState> traj{env.reset(0), {}};
  auto s = traj.start;
  for (int t = 0; t < 12 && !env.is_terminal(s); ++t) {
    const Action a = rng.uniform() < 0.3 ? static_cast<Action>(rng.below(6)) : greedy_action(q, s);
    const Seed ss = rng();
    const auto tr = env.step(s, a, ss);
    traj.steps.push_back({s, a, tr.reward, ss, tr.prob, tr.next_state});
    s = tr.next_state;
  }
  std::size_t checked = 0;
  for (std::size_t n = 0; n < traj.size() && r.passed; ++n) {
    const auto factual = replay(env, traj, n);
    ExplanationRequest req;
    req.factual_index = n;
    req.horizon = 2;
    req.seed = seed;
    req.factual_id = n;
    req.moo.seed = derive_seed({seed, n});
    const auto set = advance_explain(env, q, traj, req);
    const auto want = detail::enumerated_front(env, q, factual, factual, 2);
    bool same = set.candidates.size() == want.size();
    for (std::size_t i = 0; same && i < want.size(); ++i) {
      const auto& c = set.candidates[i];
      same = c.state.key() == want[i].key && c.scores.objectives() == want[i].objectives &&
             c.rollout.actions() == want[i].actions;
    }
    ++checked;
    if (!same) {
      r.passed = false;
      r.detail = "factual index " + std::to_string(n) + ": search returned " +
                 std::to_string(set.candidates.size()) + " candidates, enumeration " +
                 std::to_string(want.size());
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.passed && secs > kEnumerationSeconds) {
    r.passed = false;
    r.detail = "took " + detail::fmt(secs) + " s";
  }
  if (r.passed)
    r.detail = std::to_string(checked) + " factual states, " + detail::fmt(secs) + " s";
  return r;
}

inline CheckResult check_uniform_fidelity(Seed seed = 1) {
  CheckResult r{4, "uniform-Q fidelity equals 1-(1/|A|)^L", true, ""};
  double worst = 0.0;
  auto run = [&](const auto& env) {
    using State = typename std::decay_t<decltype(env)>::State;
    const std::size_t na = env.num_actions();
    LambdaQFunction<State, std::function<std::vector<double>(const State&)>> q(
        na, [na](const State&) { return std::vector<double>(na, 0.25); });
    SplitMix64 rng(seed);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t len = 1 + rng.below(5);
      std::vector<Action> acts(len);
      std::vector<Seed> seeds(len);
      for (auto& a : acts) a = static_cast<Action>(rng.below(na));
      for (auto& sd : seeds) sd = rng();
      const auto roll = execute(env, env.reset(0), acts, seeds);
      if (roll.empty()) continue;
      const double want = 1.0 - std::pow(1.0 / double(na), double(roll.size()));
      worst = std::max(worst, std::abs(fidelity(q, roll) - want));
    }
  };
  run(Gridworld{});
  run(FrozenLake{});
  r.passed = worst <= kFidelityTolerance;
  r.detail = "max |error| " + detail::fmt(worst);
  return r;
}

inline CheckResult check_su_calibration(Seed seed = 1) {
  CheckResult r{5, "stochastic uncertainty estimate calibrated on analytic chain (0.7)", true, ""};
  // Two advances with probabilities 0.875 and 0.8: reaching state 2 has
  // probability 0.7 exactly.
  const ChainEnv env({0.875, 0.8});
  const double analytic = 0.875 * 0.8;
  auto q_fn = [](const ChainState& s) {
    return s.pos == 2 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
  };
  LambdaQFunction<ChainState, decltype(q_fn)> q(2, q_fn);
  const std::vector<Action> acts{0, 0};
  std::size_t inside = 0;
  double worst = 0.0;
  for (std::size_t t = 0; t < kSuTrials; ++t) {
    const double est =
        stochastic_uncertainty(env, q, ChainState{2}, ChainState{0}, acts, kSuSamples,
                               derive_seed({seed, 0x5CULL, t}));
    worst = std::max(worst, std::abs(est - analytic));
    if (std::abs(est - analytic) <= kSuTolerance) ++inside;
  }
  r.passed = inside >= kSuRequired;
  r.detail = std::to_string(inside) + "/" + std::to_string(kSuTrials) +
             " within 0.05, max |error| " + detail::fmt(worst);
  return r;
}

inline CheckResult check_exceptionality(Seed seed = 1) {
  CheckResult r{6, "exceptionality exact: 1.0 deterministic, 0.2 for one slip", true, ""};
  GridworldConfig cfg;
  cfg.tree_regrow_prob = 0.0;
  cfg.wall_rebuild_prob = 0.0;
  const Gridworld gw(cfg);
  SplitMix64 rng(seed);
  std::size_t rollouts = 0;
  for (int trial = 0; trial < 1000 && r.passed; ++trial) {
    std::vector<Action> acts(1 + rng.below(8));
    std::vector<Seed> seeds(acts.size());
    for (auto& a : acts) a = static_cast<Action>(rng.below(6));
    for (auto& sd : seeds) sd = rng();
    const auto roll = execute(gw, gw.reset(0), acts, seeds);
    ++rollouts;
    if (exceptionality(roll) != 1.0) {
      r.passed = false;
      r.detail = "deterministic rollout scored " + detail::fmt(exceptionality(roll));
    }
  }
  // One slip on a frozen cell: UP from (1,1) sliding sideways.
  const FrozenLake fl;
  const FrozenLakeState from{{1, 1}, false};
  std::optional<Rollout<FrozenLakeState>> slip;
  for (Seed sd = 0; sd < 1000 && !slip; ++sd) {
    auto roll = execute(fl, from, std::vector<Action>{FrozenLake::kUp}, std::vector<Seed>{sd});
    if (roll.end_state().agent.row == 1) slip = roll;
  }
  if (!slip) {
    r.passed = false;
    r.detail = "no slipping seed found";
  } else if (r.passed && exceptionality(*slip) != 0.2) {
    r.passed = false;
    r.detail = "slip scored " + detail::fmt(exceptionality(*slip));
  }
  if (r.passed) r.detail = std::to_string(rollouts) + " deterministic rollouts, one slip";
  return r;
}

inline CheckResult check_gain_axioms(Seed seed = 1) {
  CheckResult r{10, "gain metric axioms on 10000 random pairs/triples", true, ""};
  SplitMix64 rng(seed);
  auto vec = [&](std::size_t d) {
    FeatureVector v(d);
    // Mix of small integers (exact ties) and reals.
    for (auto& x : v) x = rng.uniform() < 0.5 ? double(rng.below(5)) : 10.0 * rng.uniform() - 5.0;
    return v;
  };
  std::string failure;
  for (int t = 0; t < 10'000 && failure.empty(); ++t) {
    const std::size_t d = 1 + rng.below(8);
    const auto x = vec(d), y = vec(d), z = vec(d);
    const double xy = gain(x, y), yx = gain(y, x), xz = gain(x, z), yz = gain(y, z);
    if (xy < 0.0) failure = "negative gain";
    else if (gain(x, x) != 0.0) failure = "gain(x,x) != 0";
    else if ((xy == 0.0) != (x == y)) failure = "identity of indiscernibles";
    else if (xy != yx) failure = "asymmetric";
    else if (xz > xy + yz + 1e-12 * (1.0 + xy + yz)) failure = "triangle inequality";
  }
  r.passed = failure.empty();
  r.detail = r.passed ? "10000 triples" : failure;
  return r;
}

// ---------------------------------------------------------------------------
// Checks over full evaluate runs

struct EvaluateRun {
  Seed seed = 0;
  ExperimentResult result;
  std::string csv;
  double seconds = 0.0;
};

inline EvaluateRun run_evaluate(Seed seed) {
  EvaluateOptions opt;
  opt.seed = seed;
  EvaluateRun run;
  run.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  run.result = evaluate_all(opt);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  write_csv(os, run.result.table);
  run.csv = os.str();
  return run;
}

inline CheckResult check_validity_totality(const EvaluateRun& run) {
  CheckResult r{1, "validity totality over full evaluate (60 GW + 50 FL, 5 methods)", true, ""};
  std::map<std::string, std::set<std::size_t>> records;
  for (const auto& l : run.result.log) {
    records[l.environment].insert(l.record);
    if (l.success && l.validity != 1.0) {
      r.passed = false;
      r.detail = l.environment + " record " + std::to_string(l.record) + " " +
                 method_name(l.method) + " has invalid semifactuals";
    }
  }
  for (const auto& row : run.result.table.rows)
    if (row.generated > 0 && row.validity != 1.0) r.passed = false;
  if (records["gridworld"].size() != 60 || records["frozen_lake"].size() != 50) {
    r.passed = false;
    r.detail = "record counts " + std::to_string(records["gridworld"].size()) + "/" +
               std::to_string(records["frozen_lake"].size());
  }
  if (run.result.table.rows.size() != 10) r.passed = false;
  if (run.seconds > kEvaluateSeconds) {
    r.passed = false;
    r.detail = "took " + detail::fmt(run.seconds) + " s";
  }
  if (r.passed) r.detail = "validity column 1.0, " + detail::fmt(run.seconds) + " s";
  return r;
}

inline CheckResult check_directional(const std::vector<EvaluateRun>& runs) {
  CheckResult r{7, "directional ordering: (a) fidelity (b) temporal distance (c) generated %", true, ""};
  std::vector<std::string> misses;
  for (const auto& run : runs) {
    const auto& t = run.result.table;
    const std::string tag = "seed " + std::to_string(run.seed) + " ";
    for (const std::string env : {"gridworld", "frozen_lake"}) {
      const auto& adv = t.at(env, Method::Advance);
      const auto& rew = t.at(env, Method::Rewind);
      const auto& s1 = t.at(env, Method::Sgen1);
      if (!(adv.fidelity < s1.fidelity))
        misses.push_back(tag + env + " (a) " + detail::fmt(adv.fidelity) + " vs " + detail::fmt(s1.fidelity));
      if (!(rew.temporal_distance <= adv.temporal_distance))
        misses.push_back(tag + env + " (b) " + detail::fmt(rew.temporal_distance) + " vs " +
                         detail::fmt(adv.temporal_distance));
      double sgen = 0.0;
      for (auto m : {Method::Sgen1, Method::Sgen3, Method::Sgen5})
        sgen = std::max(sgen, t.at(env, m).generated_pct);
      for (const auto* row : {&adv, &rew})
        if (!(row->generated_pct >= sgen))
          misses.push_back(tag + env + " (c) " + method_name(row->method) + " " +
                           detail::fmt(row->generated_pct) + " vs " + detail::fmt(sgen));
    }
  }
  r.passed = misses.empty();
  for (const auto& m : misses) r.detail += (r.detail.empty() ? "" : "; ") + m;
  if (r.passed) r.detail = std::to_string(runs.size()) + " seeded runs";
  return r;
}

inline CheckResult check_structural(const std::vector<EvaluateRun>& runs) {
  CheckResult r{8, "S-GEN1 pairwise diversity 0; SGRL > 0 for sets of >= 2", true, ""};
  std::size_t sets = 0;
  for (const auto& run : runs) {
    for (const auto& l : run.result.log) {
      if (!l.success) continue;
      if (l.method == Method::Sgen1 && l.diversity != 0.0) {
        r.passed = false;
        r.detail = "S-GEN1 diversity " + detail::fmt(l.diversity);
      }
      if (is_sgrl(l.method) && l.candidates >= 2) {
        ++sets;
        if (!(l.diversity > 0.0)) {
          r.passed = false;
          r.detail = method_name(l.method) + " record " + std::to_string(l.record) + " diversity 0";
        }
      }
    }
    for (const auto& row : run.result.table.rows)
      if (row.method == Method::Sgen1 && row.generated > 0 && row.diversity != 0.0) r.passed = false;
  }
  if (r.passed) r.detail = std::to_string(sets) + " SGRL sets with >= 2 members";
  return r;
}

/// Replays harvested trajectories state by state and compares two evaluate
/// runs' CSVs byte for byte.
inline CheckResult check_replay_determinism(const EvaluateRun& a, const EvaluateRun& b,
                                            Seed seed = 1) {
  CheckResult r{9, "replay reproduces every state; same-seed CSVs byte-identical", true, ""};
  std::size_t states = 0;
  auto check_env = [&](const auto& env) {
    TrainingConfig tc;
    tc.seed = derive_seed({seed, 0x7EA1ULL});
    const auto q = train(env, tc);
    HarvestConfig hc;
    hc.seed = derive_seed({seed, 0xC011ULL});
    for (const auto& rec : collect_factuals(env, q, hc).records) {
      const auto& t = rec.trajectory;
      for (std::size_t i = 0; i <= t.size(); ++i, ++states)
        if (!(replay(env, t, i) == t.state_at(i))) {
          r.passed = false;
          r.detail = env.name() + " record " + std::to_string(rec.id) + " step " + std::to_string(i);
        }
      if (!(replay(env, t, t.size()) == rec.state)) r.passed = false;
    }
  };
  check_env(Gridworld{});
  check_env(FrozenLake{});
  if (a.csv != b.csv) {
    r.passed = false;
    r.detail = "CSV outputs differ";
  }
  if (r.passed) r.detail = std::to_string(states) + " states replayed, CSV " +
                           std::to_string(a.csv.size()) + " bytes identical";
  return r;
}

struct Options {
  // Includes the checks that need full evaluate runs.
  bool full = true;
  std::vector<Seed> seeds{1, 2, 3};
};

inline std::vector<CheckResult> run_all(const Options& opt) {
  std::vector<CheckResult> out;
  std::vector<EvaluateRun> runs;
  if (opt.full) {
    for (auto s : opt.seeds) runs.push_back(run_evaluate(s));
    out.push_back(check_validity_totality(runs.front()));
  }
  out.push_back(check_nondominated_sort());
  out.push_back(check_advance_enumeration());
  out.push_back(check_uniform_fidelity());
  out.push_back(check_su_calibration());
  out.push_back(check_exceptionality());
  if (opt.full) {
    out.push_back(check_directional(runs));
    out.push_back(check_structural(runs));
    out.push_back(check_replay_determinism(runs.front(), run_evaluate(runs.front().seed),
                                           runs.front().seed));
  }
  out.push_back(check_gain_axioms());
  return out;
}

inline void print(std::ostream& os, const CheckResult& r) {
  os << (r.passed ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << " -- " << r.detail
     << '\n';
}

} // namespace sgrl::selftest
