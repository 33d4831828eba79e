#pragma once

#include "sgrl/baseline.hpp"
#include "sgrl/core.hpp"
#include "sgrl/frozen_lake.hpp"
#include "sgrl/generators.hpp"
#include "sgrl/gridworld.hpp"
#include "sgrl/io.hpp"
#include "sgrl/policy.hpp"
#include "sgrl/properties.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgrl {

enum class Method { Advance, Rewind, Sgen1, Sgen3, Sgen5 };

inline constexpr std::array<Method, 5> kAllMethods{Method::Advance, Method::Rewind, Method::Sgen1,
                                                   Method::Sgen3, Method::Sgen5};

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Advance: return "SGRL-Advance";
    case Method::Rewind: return "SGRL-Rewind";
    case Method::Sgen1: return "S-GEN1";
    case Method::Sgen3: return "S-GEN3";
    case Method::Sgen5: return "S-GEN5";
  }
  return "?";
}

inline Method parse_method(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
  if (s == "advance" || s == "sgrladvance") return Method::Advance;
  if (s == "rewind" || s == "sgrlrewind") return Method::Rewind;
  if (s == "sgen1") return Method::Sgen1;
  if (s == "sgen3") return Method::Sgen3;
  if (s == "sgen5") return Method::Sgen5;
  throw std::invalid_argument("unknown method '" + s + "'");
}

inline bool is_sgrl(Method m) noexcept { return m == Method::Advance || m == Method::Rewind; }

inline std::size_t sgen_count(Method m) {
  switch (m) {
    case Method::Sgen1: return 1;
    case Method::Sgen3: return 3;
    case Method::Sgen5: return 5;
    default: throw std::invalid_argument("not an S-GEN method");
  }
}

template <class State>
struct FactualRecord {
  std::size_t id = 0;
  std::size_t episode = 0;
  // Episode prefix holding exactly `index` steps; replay(trajectory, index) is s_n.
  Trajectory<State> trajectory;
  std::size_t index = 0;
  State state;
  Action withheld = 0;
};

struct HarvestConfig {
  std::size_t per_action = 10;
  // Records need at least this many steps of history.
  std::size_t horizon = 3;
  double epsilon = 0.1;
  std::size_t max_episodes = 5000;
  std::size_t max_episode_steps = 50;
  Seed seed = 0;
};

template <class State>
struct Harvest {
  std::vector<FactualRecord<State>> records;
  // Missing records per withheld action; all zero when the quota was met.
  std::vector<std::size_t> shortfall;
  bool complete() const {
    return std::all_of(shortfall.begin(), shortfall.end(), [](auto v) { return v == 0; });
  }
};

/// Runs the epsilon-greedy policy with recorded seeds and harvests states in
/// which each action was not chosen, `per_action` per action. Each
/// (episode, index) is used at most once; it goes to the least-filled
/// eligible action.
template <Environment Env>
Harvest<typename Env::State> collect_factuals(const Env& env, const QFunction<typename Env::State>& q,
                                              const HarvestConfig& config) {
  using State = typename Env::State;
  if (config.per_action < 1) throw std::invalid_argument("per_action must be >= 1");
  const std::size_t n_actions = env.num_actions();
  std::vector<std::size_t> count(n_actions, 0);
  Harvest<State> out;
  auto full = [&] {
    return std::all_of(count.begin(), count.end(), [&](auto c) { return c >= config.per_action; });
  };

  for (std::size_t ep = 0; ep < config.max_episodes && !full(); ++ep) {
    SplitMix64 rng(derive_seed({config.seed, 0xC011ULL, ep}));
    Trajectory<State> traj{env.reset(derive_seed({config.seed, ep})), {}};
    State s = traj.start;
    for (std::size_t t = 0; t <= config.max_episode_steps && !full(); ++t) {
      if (env.is_terminal(s)) break;
      const Action greedy = greedy_action(q, s);
      if (t >= config.horizon) {
        std::optional<Action> pick;
        for (Action a = 0; a < n_actions; ++a) {
          if (a == greedy || count[a] >= config.per_action) continue;
          if (!pick || count[a] < count[*pick]) pick = a;
        }
        if (pick) {
          out.records.push_back({out.records.size(), ep, traj, t, s, *pick});
          ++count[*pick];
        }
      }
      if (t == config.max_episode_steps) break;
      const Action a = rng.uniform() < config.epsilon ? static_cast<Action>(rng.below(n_actions))
                                                      : greedy;
      const Seed step_seed = rng();
      const auto tr = env.step(s, a, step_seed);
      traj.steps.push_back({s, a, tr.reward, step_seed, tr.prob, tr.next_state});
      s = tr.next_state;
    }
  }
  out.shortfall.resize(n_actions);
  for (std::size_t a = 0; a < n_actions; ++a)
    out.shortfall[a] = config.per_action - std::min(config.per_action, count[a]);
  return out;
}

struct ExperimentConfig {
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  std::size_t horizon = 3;
  MooConfig moo;
  BaselineConfig baseline;
  std::size_t search_samples = 30;
  std::size_t report_samples = 200;
  // Action-path search for baseline states.
  std::size_t path_horizon = 6;
  std::size_t path_budget = 600;
  Seed seed = 0;
};

/// One (record, method) outcome. Means are over the returned set.
struct RecordLog {
  std::string environment;
  std::size_t record = 0;
  Method method = Method::Advance;
  bool success = false;
  std::string error;
  std::size_t candidates = 0;
  double validity = 0.0;
  double temporal_distance = 0.0;
  double fidelity = 0.0;
  double stochastic_uncertainty = 0.0;
  double exceptionality = 0.0;
  double gain = 0.0;
  double diversity = 0.0;
  std::size_t path_not_found = 0;
};

struct MethodMetrics {
  std::string environment;
  Method method = Method::Advance;
  std::size_t records = 0;
  std::size_t generated = 0;
  double generated_pct = 0.0;
  double validity = 0.0;
  double temporal_distance = 0.0;
  double fidelity = 0.0;
  double stochastic_uncertainty = 0.0;
  double exceptionality = 0.0;
  double gain = 0.0;
  double diversity = 0.0;
  std::size_t path_not_found = 0;
  // Reported in Markdown only; not part of the CSV.
  double wall_seconds = 0.0;
};

struct MetricsTable {
  std::vector<MethodMetrics> rows;

  const MethodMetrics& at(const std::string& env, Method m) const {
    for (const auto& r : rows)
      if (r.environment == env && r.method == m) return r;
    throw std::out_of_range("no metrics for " + env + "/" + method_name(m));
  }
};

struct ExperimentResult {
  MetricsTable table;
  std::vector<RecordLog> log;
};

namespace detail {

template <class T>
void accumulate_means(RecordLog& log, const std::vector<T>& scores) {
  for (const auto& s : scores) {
    log.validity += s.validity;
    log.temporal_distance += s.temporal_distance;
    log.fidelity += s.fidelity;
    log.stochastic_uncertainty += s.stochastic_uncertainty;
    log.exceptionality += s.exceptionality;
  }
  const double n = static_cast<double>(scores.size());
  log.validity /= n;
  log.temporal_distance /= n;
  log.fidelity /= n;
  log.stochastic_uncertainty /= n;
  log.exceptionality /= n;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

} // namespace detail

/// Explains one record with one method and re-scores the result with the
/// reporting sample count.
template <PerturbableEnvironment Env>
RecordLog run_record(const Env& env, const QFunction<typename Env::State>& q,
                     const FactualRecord<typename Env::State>& record, Method method,
                     const ExperimentConfig& config) {
  RecordLog log;
  log.environment = env.name();
  log.record = record.id;
  log.method = method;
  const Seed method_seed = derive_seed({config.seed, record.id, static_cast<std::uint64_t>(method)});
  try {
    std::vector<PropertyScores> scores;
    std::vector<FeatureVector> features;
    std::vector<double> gains;
    if (is_sgrl(method)) {
      ExplanationRequest req;
      req.factual_index = record.index;
      req.horizon = config.horizon;
      req.direction = method == Method::Advance ? Direction::Advance : Direction::Rewind;
      req.moo = config.moo;
      req.moo.seed = method_seed;
      req.su_samples = config.search_samples;
      req.seed = config.seed;
      req.factual_id = record.id;
      const auto set = explain(env, q, record.trajectory, req);
      for (std::size_t i = 0; i < set.candidates.size(); ++i) {
        const auto& c = set.candidates[i];
        scores.push_back(score_candidate(env, q, record.state, c.rollout, config.horizon,
                                         config.report_samples, derive_seed({method_seed, i})));
        features.push_back(env.encode_features(c.state));
        gains.push_back(c.feature_gain);
      }
    } else {
      BaselineConfig bc = config.baseline;
      bc.diversity_count = sgen_count(method);
      bc.seed = method_seed;
      auto result = sgen_explain(env, q, record.state, bc);
      attach_paths(env, record.state, result, config.path_horizon, config.path_budget,
                   derive_seed({method_seed, 0x9A7ULL}));
      for (const auto& b : score_baseline(env, q, record.state, result, config.horizon,
                                          config.report_samples, method_seed)) {
        scores.push_back(b.scores);
        if (!b.path_found) ++log.path_not_found;
      }
      for (const auto& s : result.states) features.push_back(env.encode_features(s));
      gains = result.gains;
    }
    log.candidates = scores.size();
    log.success = !scores.empty();
    if (log.success) {
      detail::accumulate_means(log, scores);
      log.gain = detail::mean(gains);
      log.diversity = pairwise_diversity(features);
    }
  } catch (const std::exception& e) {
    log = RecordLog{};
    log.environment = env.name();
    log.record = record.id;
    log.method = method;
    log.error = e.what();
  }
  return log;
}

/// Aggregates per-record logs into one row per method: means over records
/// with a generated explanation, generation percentage over all records.
inline MethodMetrics aggregate(const std::string& environment, Method method,
                               const std::vector<RecordLog>& logs) {
  MethodMetrics m;
  m.environment = environment;
  m.method = method;
  for (const auto& l : logs) {
    if (l.environment != environment || l.method != method) continue;
    ++m.records;
    if (!l.success) continue;
    ++m.generated;
    m.validity += l.validity;
    m.temporal_distance += l.temporal_distance;
    m.fidelity += l.fidelity;
    m.stochastic_uncertainty += l.stochastic_uncertainty;
    m.exceptionality += l.exceptionality;
    m.gain += l.gain;
    m.diversity += l.diversity;
    m.path_not_found += l.path_not_found;
  }
  m.generated_pct = m.records == 0 ? 0.0 : 100.0 * double(m.generated) / double(m.records);
  const double n = m.generated == 0 ? std::numeric_limits<double>::quiet_NaN() : double(m.generated);
  for (double* v : {&m.validity, &m.temporal_distance, &m.fidelity, &m.stochastic_uncertainty,
                    &m.exceptionality, &m.gain, &m.diversity})
    *v /= n;
  return m;
}

template <PerturbableEnvironment Env>
ExperimentResult run_experiment(const Env& env, const QFunction<typename Env::State>& q,
                                const std::vector<FactualRecord<typename Env::State>>& records,
                                const ExperimentConfig& config) {
  if (config.methods.empty()) throw std::invalid_argument("no method selected");
  ExperimentResult out;
  std::vector<double> seconds(kAllMethods.size(), 0.0);
  for (const auto& rec : records) {
    for (auto m : config.methods) {
      const auto t0 = std::chrono::steady_clock::now();
      out.log.push_back(run_record(env, q, rec, m, config));
      seconds[static_cast<std::size_t>(m)] +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  }
  for (auto m : config.methods) {
    auto row = aggregate(env.name(), m, out.log);
    row.wall_seconds = seconds[static_cast<std::size_t>(m)];
    out.table.rows.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline const std::vector<std::string>& csv_metrics() {
  static const std::vector<std::string> names{
      "records",  "generated",      "generated_pct",          "validity",
      "temporal_distance", "fidelity", "stochastic_uncertainty", "exceptionality",
      "gain",     "diversity",      "path_not_found"};
  return names;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Long-format CSV: one `environment,method,metric,value` row per metric.
inline void write_csv(std::ostream& os, const MetricsTable& table) {
  os << "environment,method,metric,value\n";
  for (const auto& r : table.rows) {
    const std::vector<std::string> values{std::to_string(r.records),
                                          std::to_string(r.generated),
                                          format_double(r.generated_pct),
                                          format_double(r.validity),
                                          format_double(r.temporal_distance),
                                          format_double(r.fidelity),
                                          format_double(r.stochastic_uncertainty),
                                          format_double(r.exceptionality),
                                          format_double(r.gain),
                                          format_double(r.diversity),
                                          std::to_string(r.path_not_found)};
    for (std::size_t i = 0; i < values.size(); ++i)
      os << r.environment << ',' << method_name(r.method) << ',' << csv_metrics()[i] << ','
         << values[i] << '\n';
  }
}

inline MetricsTable read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "environment,method,metric,value")
    throw std::runtime_error("metrics CSV: bad header");
  MetricsTable table;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 4) throw std::runtime_error("metrics CSV: bad line " + std::to_string(lineno));
    const Method m = parse_method(f[1]);
    if (table.rows.empty() || table.rows.back().environment != f[0] || table.rows.back().method != m)
      table.rows.push_back({f[0], m});
    auto& r = table.rows.back();
    const double v = std::strtod(f[3].c_str(), nullptr);
    const auto& k = f[2];
    if (k == "records") r.records = std::stoull(f[3]);
    else if (k == "generated") r.generated = std::stoull(f[3]);
    else if (k == "generated_pct") r.generated_pct = v;
    else if (k == "validity") r.validity = v;
    else if (k == "temporal_distance") r.temporal_distance = v;
    else if (k == "fidelity") r.fidelity = v;
    else if (k == "stochastic_uncertainty") r.stochastic_uncertainty = v;
    else if (k == "exceptionality") r.exceptionality = v;
    else if (k == "gain") r.gain = v;
    else if (k == "diversity") r.diversity = v;
    else if (k == "path_not_found") r.path_not_found = std::stoull(f[3]);
    else throw std::runtime_error("metrics CSV: unknown metric " + k);
  }
  return table;
}

/// Metrics as rows, (environment, method) as columns.
inline void write_markdown(std::ostream& os, const MetricsTable& table) {
  os << "| Metric |";
  for (const auto& r : table.rows) os << ' ' << r.environment << ' ' << method_name(r.method) << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < table.rows.size(); ++i) os << "---|";
  os << '\n';
  auto row = [&](const char* label, auto get) {
    os << "| " << label << " |";
    for (const auto& r : table.rows) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(get(r)));
      os << ' ' << buf << " |";
    }
    os << '\n';
  };
  row("Generated semifactuals (%)", [](const auto& r) { return r.generated_pct; });
  row("Validity (=1)", [](const auto& r) { return r.validity; });
  row("Temporal distance (lower)", [](const auto& r) { return r.temporal_distance; });
  row("Fidelity (lower)", [](const auto& r) { return r.fidelity; });
  row("Stochastic uncertainty (lower)", [](const auto& r) { return r.stochastic_uncertainty; });
  row("Exceptionality (lower)", [](const auto& r) { return r.exceptionality; });
  row("Gain (higher)", [](const auto& r) { return r.gain; });
  row("Diversity (higher)", [](const auto& r) { return r.diversity; });
  row("Path not found", [](const auto& r) { return double(r.path_not_found); });
  row("Wall time (s)", [](const auto& r) { return r.wall_seconds; });
}

inline json to_json(const RecordLog& l) {
  return {{"environment", l.environment},
          {"record", l.record},
          {"method", method_name(l.method)},
          {"success", l.success},
          {"error", l.error},
          {"candidates", l.candidates},
          {"validity", l.validity},
          {"temporal_distance", l.temporal_distance},
          {"fidelity", l.fidelity},
          {"stochastic_uncertainty", l.stochastic_uncertainty},
          {"exceptionality", l.exceptionality},
          {"gain", l.gain},
          {"diversity", l.diversity},
          {"path_not_found", l.path_not_found}};
}

inline RecordLog record_log_from_json(const json& j) {
  RecordLog l;
  l.environment = j.at("environment").get<std::string>();
  l.record = j.at("record").get<std::size_t>();
  l.method = parse_method(j.at("method").get<std::string>());
  l.success = j.at("success").get<bool>();
  l.error = j.at("error").get<std::string>();
  l.candidates = j.at("candidates").get<std::size_t>();
  l.validity = j.at("validity").get<double>();
  l.temporal_distance = j.at("temporal_distance").get<double>();
  l.fidelity = j.at("fidelity").get<double>();
  l.stochastic_uncertainty = j.at("stochastic_uncertainty").get<double>();
  l.exceptionality = j.at("exceptionality").get<double>();
  l.gain = j.at("gain").get<double>();
  l.diversity = j.at("diversity").get<double>();
  l.path_not_found = j.at("path_not_found").get<std::size_t>();
  return l;
}

inline void write_log(std::ostream& os, const std::vector<RecordLog>& log) {
  for (const auto& l : log) os << to_json(l).dump() << '\n';
}

// ---------------------------------------------------------------------------
// End-to-end evaluation over both environments

struct EvaluateOptions {
  std::size_t per_action = 10;
  ExperimentConfig experiment;
  TrainingConfig training;
  HarvestConfig harvest;
  GridworldConfig gridworld;
  FrozenLakeConfig frozen_lake;
  std::vector<std::string> environments{"gridworld", "frozen_lake"};
  Seed seed = 0;
};

// Reads {"per_action", "horizon", "search_samples", "report_samples",
// "path_horizon", "path_budget", "methods", "environments", "training", "moo",
// "baseline", "harvest": {"epsilon", "max_episodes", "max_episode_steps"},
// "gridworld", "frozen_lake"}. Missing keys keep their defaults.
inline void from_json(const json& j, EvaluateOptions& o) {
  o.per_action = j.value("per_action", o.per_action);
  auto& e = o.experiment;
  e.horizon = j.value("horizon", e.horizon);
  e.search_samples = j.value("search_samples", e.search_samples);
  e.report_samples = j.value("report_samples", e.report_samples);
  e.path_horizon = j.value("path_horizon", e.path_horizon);
  e.path_budget = j.value("path_budget", e.path_budget);
  if (j.contains("methods")) {
    e.methods.clear();
    for (const auto& m : j.at("methods")) e.methods.push_back(parse_method(m.get<std::string>()));
  }
  if (j.contains("environments")) j.at("environments").get_to(o.environments);
  if (j.contains("training")) j.at("training").get_to(o.training);
  if (j.contains("moo")) j.at("moo").get_to(e.moo);
  if (j.contains("baseline")) j.at("baseline").get_to(e.baseline);
  if (j.contains("harvest")) {
    const auto& h = j.at("harvest");
    o.harvest.epsilon = h.value("epsilon", o.harvest.epsilon);
    o.harvest.max_episodes = h.value("max_episodes", o.harvest.max_episodes);
    o.harvest.max_episode_steps = h.value("max_episode_steps", o.harvest.max_episode_steps);
  }
  if (j.contains("gridworld")) j.at("gridworld").get_to(o.gridworld);
  if (j.contains("frozen_lake")) j.at("frozen_lake").get_to(o.frozen_lake);
}

struct EnvironmentRun {
  std::string environment;
  std::size_t records = 0;
  std::vector<std::size_t> shortfall;
};

template <PerturbableEnvironment Env>
ExperimentResult evaluate_environment(const Env& env, const EvaluateOptions& opt,
                                      EnvironmentRun* info = nullptr) {
  TrainingConfig tc = opt.training;
  tc.seed = derive_seed({opt.seed, 0x7EA1ULL});
  const auto q = train(env, tc);
  HarvestConfig hc = opt.harvest;
  hc.per_action = opt.per_action;
  hc.horizon = opt.experiment.horizon;
  hc.seed = derive_seed({opt.seed, 0xC011ULL});
  const auto harvest = collect_factuals(env, q, hc);
  ExperimentConfig ec = opt.experiment;
  ec.seed = derive_seed({opt.seed, 0xE7A1ULL});
  if (info) *info = {env.name(), harvest.records.size(), harvest.shortfall};
  return run_experiment(env, q, harvest.records, ec);
}

inline ExperimentResult evaluate_all(const EvaluateOptions& opt,
                                     std::vector<EnvironmentRun>* runs = nullptr) {
  ExperimentResult all;
  for (const auto& name : opt.environments) {
    EnvironmentRun info;
    ExperimentResult r;
    if (name == "gridworld")
      r = evaluate_environment(Gridworld(opt.gridworld), opt, &info);
    else if (name == "frozen_lake")
      r = evaluate_environment(FrozenLake(opt.frozen_lake), opt, &info);
    else
      throw std::invalid_argument("unknown environment '" + name + "'");
    all.table.rows.insert(all.table.rows.end(), r.table.rows.begin(), r.table.rows.end());
    all.log.insert(all.log.end(), r.log.begin(), r.log.end());
    if (runs) runs->push_back(info);
  }
  return all;
}

/// Writes summary.csv, report.md and records.jsonl into `dir`.
inline void write_reports(const std::filesystem::path& dir, const ExperimentResult& result) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("summary.csv");
    write_csv(os, result.table);
  }
  {
    auto os = open("report.md");
    write_markdown(os, result.table);
  }
  {
    auto os = open("records.jsonl");
    write_log(os, result.log);
  }
}

// ---------------------------------------------------------------------------
// Human-readable explanation

template <Environment Env>
std::string action_label(const Env& env, Action a) {
  if constexpr (requires { env.action_name(a); })
    return env.action_name(a);
  else
    return std::to_string(int(a));
}

/// Prints the factual state, the chosen action and every Pareto candidate.
/// Scores use the same number formatting as the JSON serialization.
template <Environment Env>
void print_explanation(std::ostream& os, const Env& env, const ExplanationSet<typename Env::State>& set) {
  if constexpr (requires { env.render(set.factual_state); }) os << env.render(set.factual_state);
  os << "chosen action: " << action_label(env, set.chosen_action) << '\n';
  os << "candidates: " << set.candidates.size() << '\n';
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    const auto& c = set.candidates[i];
    os << "#" << i << " path:";
    for (auto a : c.rollout.actions()) os << ' ' << action_label(env, a);
    os << "\n   state: " << json(c.state).dump() << '\n';
    os << "   validity=" << c.scores.validity
       << " temporal_distance=" << json(c.scores.temporal_distance).dump()
       << " stochastic_uncertainty=" << json(c.scores.stochastic_uncertainty).dump()
       << " fidelity=" << json(c.scores.fidelity).dump()
       << " exceptionality=" << json(c.scores.exceptionality).dump()
       << " feature_gain=" << json(c.feature_gain).dump() << '\n';
  }
}

} // namespace sgrl
