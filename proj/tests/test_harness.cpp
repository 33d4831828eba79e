#include <gtest/gtest.h>

#include "sgrl/harness.hpp"

#include <cmath>
#include <set>
#include <sstream>

using namespace sgrl;

namespace {

template <class Env>
QTable<typename Env::State> quick_policy(const Env& env) {
  TrainingConfig tc;
  tc.steps = 60'000;
  tc.epsilon_decay_steps = 30'000;
  tc.seed = 6;
  return train(env, tc);
}

EvaluateOptions small_run(Seed seed) {
  EvaluateOptions opt;
  opt.per_action = 2;
  opt.training.steps = 60'000;
  opt.training.epsilon_decay_steps = 30'000;
  opt.seed = seed;
  return opt;
}

std::string csv_of(const MetricsTable& t) {
  std::ostringstream os;
  write_csv(os, t);
  return os.str();
}

template <class Env>
void check_harvest(const Env& env, std::size_t expected) {
  const auto q = quick_policy(env);
  HarvestConfig hc;
  hc.seed = 12;
  const auto h = collect_factuals(env, q, hc);
  ASSERT_TRUE(h.complete());
  ASSERT_EQ(h.records.size(), expected);
  std::vector<std::size_t> per(env.num_actions(), 0);
  std::set<std::pair<std::size_t, std::size_t>> used;
  for (std::size_t i = 0; i < h.records.size(); ++i) {
    const auto& r = h.records[i];
    EXPECT_EQ(r.id, i);
    EXPECT_NE(greedy_action(q, r.state), r.withheld);
    EXPECT_GE(r.index, hc.horizon);
    EXPECT_EQ(r.trajectory.size(), r.index);
    EXPECT_EQ(replay(env, r.trajectory, r.index), r.state);
    EXPECT_FALSE(env.is_terminal(r.state));
    EXPECT_TRUE(used.insert({r.episode, r.index}).second);
    ++per[r.withheld];
  }
  for (auto c : per) EXPECT_EQ(c, hc.per_action);
}

} // namespace

TEST(Methods, NamesRoundTrip) {
  for (auto m : kAllMethods) EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_EQ(parse_method("advance"), Method::Advance);
  EXPECT_EQ(parse_method("REWIND"), Method::Rewind);
  EXPECT_EQ(parse_method("sgen3"), Method::Sgen3);
  EXPECT_THROW(parse_method("sgen2"), std::invalid_argument);
  EXPECT_THROW(sgen_count(Method::Advance), std::invalid_argument);
}

TEST(CollectFactuals, GridworldQuota) { check_harvest(Gridworld{}, 60U); }

TEST(CollectFactuals, FrozenLakeQuota) { check_harvest(FrozenLake{}, 50U); }

TEST(CollectFactuals, Deterministic) {
  const FrozenLake fl;
  const auto q = quick_policy(fl);
  HarvestConfig hc;
  hc.seed = 3;
  const auto a = collect_factuals(fl, q, hc), b = collect_factuals(fl, q, hc);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].state, b.records[i].state);
    EXPECT_EQ(a.records[i].withheld, b.records[i].withheld);
  }
}

TEST(Aggregate, GenerationPercentAndNaNMeans) {
  std::vector<RecordLog> logs(4);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    logs[i].environment = "x";
    logs[i].record = i;
    logs[i].method = Method::Sgen1;
  }
  logs[1].success = true;
  logs[1].validity = 1.0;
  logs[1].fidelity = 0.4;
  logs[3].success = true;
  logs[3].validity = 1.0;
  logs[3].fidelity = 0.2;
  auto m = aggregate("x", Method::Sgen1, logs);
  EXPECT_EQ(m.records, 4U);
  EXPECT_EQ(m.generated, 2U);
  EXPECT_DOUBLE_EQ(m.generated_pct, 50.0);
  EXPECT_DOUBLE_EQ(m.fidelity, 0.3);
  EXPECT_EQ(m.validity, 1.0);
  auto none = aggregate("x", Method::Advance, logs);
  EXPECT_EQ(none.records, 0U);
  EXPECT_TRUE(std::isnan(none.fidelity));
}

TEST(RunRecord, RewindWithoutHistoryIsLoggedNotThrown) {
  const Gridworld gw;
  const auto q = quick_policy(gw);
  FactualRecord<GridworldState> rec;
  rec.trajectory.start = gw.reset(0);
  auto tr = gw.step(rec.trajectory.start, Gridworld::kRight, 1);
  rec.trajectory.steps.push_back({rec.trajectory.start, Gridworld::kRight, tr.reward, 1, tr.prob,
                                  tr.next_state});
  rec.index = 1;
  rec.state = tr.next_state;
  const auto log = run_record(gw, q, rec, Method::Rewind, ExperimentConfig{});
  EXPECT_FALSE(log.success);
  EXPECT_FALSE(log.error.empty());
  EXPECT_EQ(log.candidates, 0U);
}

TEST(Evaluate, ReportsReconcileWithLog) {
  std::vector<EnvironmentRun> runs;
  const auto result = evaluate_all(small_run(5), &runs);
  ASSERT_EQ(runs.size(), 2U);
  EXPECT_EQ(runs[0].records, 12U);
  EXPECT_EQ(runs[1].records, 10U);
  ASSERT_EQ(result.table.rows.size(), 10U);
  EXPECT_EQ(result.log.size(), 5U * 22U);
  for (const auto& row : result.table.rows) {
    std::size_t records = 0, generated = 0;
    double fid = 0.0, div = 0.0;
    for (const auto& l : result.log) {
      if (l.environment != row.environment || l.method != row.method) continue;
      ++records;
      if (!l.success) continue;
      ++generated;
      fid += l.fidelity;
      div += l.diversity;
      EXPECT_EQ(l.validity, 1.0);
      EXPECT_GT(l.candidates, 0U);
      if (!is_sgrl(l.method)) {
        EXPECT_LE(l.candidates, sgen_count(l.method));
      }
    }
    EXPECT_EQ(row.records, records);
    EXPECT_EQ(row.generated, generated);
    EXPECT_DOUBLE_EQ(row.generated_pct, 100.0 * double(generated) / double(records));
    if (generated > 0) {
      EXPECT_NEAR(row.fidelity, fid / double(generated), 1e-12);
      EXPECT_NEAR(row.diversity, div / double(generated), 1e-12);
      EXPECT_EQ(row.validity, 1.0);
    }
  }
}

TEST(Evaluate, SameSeedByteIdenticalCsv) {
  const auto a = evaluate_all(small_run(9)), b = evaluate_all(small_run(9));
  EXPECT_EQ(csv_of(a.table), csv_of(b.table));
}

TEST(Reports, CsvRoundTrip) {
  MetricsTable t;
  MethodMetrics m;
  m.environment = "gridworld";
  m.method = Method::Rewind;
  m.records = 60;
  m.generated = 41;
  m.generated_pct = 100.0 * 41.0 / 60.0;
  m.validity = 1.0;
  m.temporal_distance = 0.1 + 0.2;
  m.fidelity = 1.0 / 3.0;
  m.stochastic_uncertainty = 0.0;
  m.exceptionality = 0.95;
  m.gain = std::sqrt(2.0);
  m.diversity = 0.0;
  m.path_not_found = 0;
  t.rows.push_back(m);
  m.method = Method::Sgen5;
  m.path_not_found = 7;
  m.fidelity = std::numeric_limits<double>::quiet_NaN();
  t.rows.push_back(m);
  std::stringstream ss(csv_of(t));
  const auto back = read_csv(ss);
  EXPECT_EQ(csv_of(back), csv_of(t));
  ASSERT_EQ(back.rows.size(), 2U);
  EXPECT_EQ(back.rows[0].temporal_distance, 0.1 + 0.2);
  EXPECT_EQ(back.rows[0].gain, std::sqrt(2.0));
  EXPECT_EQ(back.rows[1].path_not_found, 7U);
  EXPECT_TRUE(std::isnan(back.rows[1].fidelity));
  std::stringstream bad("env,method\n");
  EXPECT_THROW(read_csv(bad), std::runtime_error);
}

TEST(Reports, MarkdownShape) {
  MetricsTable t;
  t.rows.resize(3);
  t.rows[1].method = Method::Rewind;
  t.rows[2].method = Method::Sgen1;
  std::ostringstream os;
  write_markdown(os, t);
  std::istringstream is(os.str());
  std::vector<std::string> lines;
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 12U);
  EXPECT_EQ(lines[1], "|---|---|---|---|");
  for (const auto& l : lines) EXPECT_EQ(std::count(l.begin(), l.end(), '|'), 5);
}

TEST(Reports, LogJsonRoundTrip) {
  RecordLog l;
  l.environment = "frozen_lake";
  l.record = 4;
  l.method = Method::Sgen3;
  l.success = true;
  l.candidates = 3;
  l.fidelity = 0.125;
  l.gain = 2.5;
  l.path_not_found = 1;
  const auto back = record_log_from_json(json::parse(to_json(l).dump()));
  EXPECT_EQ(to_json(back), to_json(l));
}

TEST(PrintExplanation, MatchesJson) {
  const FrozenLake fl;
  const auto q = quick_policy(fl);
  HarvestConfig hc;
  hc.per_action = 1;
  const auto h = collect_factuals(fl, q, hc);
  ASSERT_FALSE(h.records.empty());
  const auto& rec = h.records.front();
  ExplanationRequest req;
  req.factual_index = rec.index;
  const auto set = explain(fl, q, rec.trajectory, req);
  std::ostringstream os;
  print_explanation(os, fl, set);
  const auto text = os.str();
  EXPECT_NE(text.find("candidates: " + std::to_string(set.candidates.size())), std::string::npos);
  const auto j = to_json(set);
  ASSERT_EQ(j.at("candidates").size(), set.candidates.size());
  for (const auto& c : j.at("candidates")) {
    const auto& s = c.at("scores");
    EXPECT_NE(text.find("fidelity=" + s.at("fidelity").dump()), std::string::npos);
    EXPECT_NE(text.find("exceptionality=" + s.at("exceptionality").dump()), std::string::npos);
    EXPECT_NE(text.find("state: " + c.at("state").dump()), std::string::npos);
  }
}

TEST(EvaluateOptions, PartialJsonKeepsDefaults) {
  const auto j = json::parse(R"({"per_action": 4, "methods": ["advance", "sgen5"],
    "training": {"steps": 1000}, "moo": {"generations": 7}, "harvest": {"epsilon": 0.2},
    "frozen_lake": {"intended_prob": 0.8}})");
  EvaluateOptions opt;
  j.get_to(opt);
  EXPECT_EQ(opt.per_action, 4U);
  EXPECT_EQ(opt.experiment.methods, (std::vector<Method>{Method::Advance, Method::Sgen5}));
  EXPECT_EQ(opt.training.steps, 1000U);
  EXPECT_EQ(opt.training.discount, TrainingConfig{}.discount);
  EXPECT_EQ(opt.experiment.moo.generations, 7U);
  EXPECT_EQ(opt.experiment.moo.population, MooConfig{}.population);
  EXPECT_EQ(opt.harvest.epsilon, 0.2);
  EXPECT_EQ(opt.frozen_lake.intended_prob, 0.8);
  EXPECT_EQ(opt.environments.size(), 2U);
  EXPECT_EQ(opt.experiment.horizon, 3U);
}
