// Command-line driver: train, collect, explain, evaluate, selftest.

#include "sgrl/selftest.hpp"
#include "sgrl/sgrl.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace sgrl;

namespace {

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return json::parse(is);
}

// Calls f(env) with the named environment. An optional "gridworld" or
// "frozen_lake" object in `config` overrides the layout.
template <class F>
void with_env(const std::string& name, const json& config, F&& f) {
  if (name == "gridworld") {
    GridworldConfig c;
    if (config.contains("gridworld")) config.at("gridworld").get_to(c);
    f(Gridworld(c));
  } else if (name == "frozen_lake") {
    FrozenLakeConfig c;
    if (config.contains("frozen_lake")) config.at("frozen_lake").get_to(c);
    f(FrozenLake(c));
  } else {
    throw std::invalid_argument("unknown environment '" + name + "' (gridworld, frozen_lake)");
  }
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

struct Common {
  std::string env = "gridworld";
  std::string config;
  Seed seed = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--env", c.env, "gridworld or frozen_lake")
      ->check(CLI::IsMember({"gridworld", "frozen_lake"}));
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master seed");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semifactual explanations for tabular RL policies"};
  app.require_subcommand(1);

  Common common;
  std::string policy_path = "policy.qtable";
  std::string out_path;

  auto* train_cmd = app.add_subcommand("train", "train a tabular Q-learning policy");
  add_common(train_cmd, common);
  train_cmd->add_option("-o,--out", policy_path, "policy file to write");

  std::size_t per_action = 10;
  std::string collect_dir = "records";
  auto* collect_cmd = app.add_subcommand("collect", "harvest factual states from a policy");
  add_common(collect_cmd, common);
  collect_cmd->add_option("--policy", policy_path)->required()->check(CLI::ExistingFile);
  collect_cmd->add_option("--per-action", per_action, "records per withheld action");
  collect_cmd->add_option("-o,--out", collect_dir, "output directory");

  std::string trajectory_path, method_arg = "advance";
  std::size_t index = 0, horizon = 3;
  MooConfig moo;
  std::string json_out;
  auto* explain_cmd = app.add_subcommand("explain", "explain one factual state");
  add_common(explain_cmd, common);
  explain_cmd->add_option("--policy", policy_path)->required()->check(CLI::ExistingFile);
  explain_cmd->add_option("--trajectory", trajectory_path, "trajectory JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--index", index, "step index n of the factual state")->required();
  explain_cmd->add_option("--method", method_arg, "advance, rewind, sgen1, sgen3, sgen5");
  explain_cmd->add_option("--k", horizon, "horizon")->check(CLI::PositiveNumber);
  explain_cmd->add_option("--generations", moo.generations);
  explain_cmd->add_option("--population", moo.population);
  explain_cmd->add_option("--json", json_out, "also write the explanation as JSON");

  std::string eval_dir = "results";
  std::vector<std::string> eval_envs;
  auto* eval_cmd = app.add_subcommand("evaluate", "run the full experiment");
  eval_cmd->add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
  eval_cmd->add_option("--seed", common.seed, "master seed");
  eval_cmd->add_option("--env", eval_envs, "restrict to environments");
  eval_cmd->add_option("-o,--out", eval_dir, "output directory");

  bool full = false;
  std::vector<Seed> selftest_seeds{1, 2, 3};
  auto* self_cmd = app.add_subcommand("selftest", "run the oracle checks");
  self_cmd->add_flag("--full", full, "include the end-to-end evaluate checks");
  self_cmd->add_option("--seeds", selftest_seeds, "seeds for the evaluate checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const json cfg = read_config(common.config);
      with_env(common.env, cfg, [&](const auto& env) {
        TrainingConfig tc;
        if (cfg.contains("training")) cfg.at("training").get_to(tc);
        tc.seed = common.seed;
        const auto q = train(env, tc);
        save_qtable(policy_path, q);
        std::cout << "wrote " << q.size() << " states to " << policy_path << '\n';
      });
    } else if (*collect_cmd) {
      const json cfg = read_config(common.config);
      with_env(common.env, cfg, [&](const auto& env) {
        using State = typename std::decay_t<decltype(env)>::State;
        const auto q = load_qtable<State>(policy_path);
        HarvestConfig hc;
        hc.per_action = per_action;
        hc.horizon = cfg.value("horizon", hc.horizon);
        hc.seed = common.seed;
        const auto harvest = collect_factuals(env, q, hc);
        const fs::path dir(collect_dir);
        auto index_os = open_out(dir / "records.jsonl");
        for (const auto& r : harvest.records) {
          const auto traj_name = "trajectory_" + std::to_string(r.id) + ".jsonl";
          auto os = open_out(dir / traj_name);
          write_trajectory(os, r.trajectory);
          index_os << json{{"id", r.id},
                           {"episode", r.episode},
                           {"index", r.index},
                           {"withheld", r.withheld},
                           {"state", r.state},
                           {"trajectory", traj_name}}
                          .dump()
                   << '\n';
        }
        std::cout << harvest.records.size() << " records in " << dir.string() << '\n';
        if (!harvest.complete()) {
          std::cout << "shortfall per action:";
          for (auto s : harvest.shortfall) std::cout << ' ' << s;
          std::cout << '\n';
        }
      });
    } else if (*explain_cmd) {
      const json cfg = read_config(common.config);
      const Method method = parse_method(method_arg);
      with_env(common.env, cfg, [&](const auto& env) {
        using State = typename std::decay_t<decltype(env)>::State;
        const auto q = load_qtable<State>(policy_path);
        std::ifstream ts(trajectory_path);
        const auto traj = read_trajectory(ts, env);
        if (index > traj.size())
          throw std::invalid_argument("--index beyond trajectory of " + std::to_string(traj.size()) +
                                      " steps");
        if (is_sgrl(method)) {
          ExplanationRequest req;
          req.factual_index = index;
          req.horizon = horizon;
          req.direction = method == Method::Advance ? Direction::Advance : Direction::Rewind;
          req.moo = moo;
          req.moo.seed = derive_seed({common.seed, 0x3E9ULL});
          req.seed = common.seed;
          const auto set = explain(env, q, traj, req);
          print_explanation(std::cout, env, set);
          if (!json_out.empty()) open_out(json_out) << to_json(set).dump(2) << '\n';
        } else {
          const auto factual = replay(env, traj, index);
          BaselineConfig bc;
          if (cfg.contains("baseline")) cfg.at("baseline").get_to(bc);
          bc.diversity_count = sgen_count(method);
          bc.seed = common.seed;
          auto result = sgen_explain(env, q, factual, bc);
          attach_paths(env, factual, result, 6, 600, derive_seed({common.seed, 0x9A7ULL}));
          const auto scores = score_baseline(env, q, factual, result, horizon, 200, common.seed);
          std::cout << env.render(factual);
          std::cout << "chosen action: " << action_label(env, greedy_action(q, factual)) << '\n';
          std::cout << "states: " << result.states.size() << '\n';
          json out = json::array();
          for (std::size_t i = 0; i < result.states.size(); ++i) {
            const auto& s = scores[i].scores;
            std::cout << "#" << i << " state: " << json(result.states[i]).dump()
                      << " gain=" << json(result.gains[i]).dump()
                      << " path=" << (scores[i].path_found ? "found" : "none")
                      << " temporal_distance=" << json(s.temporal_distance).dump()
                      << " fidelity=" << json(s.fidelity).dump() << '\n';
            out.push_back({{"state", result.states[i]},
                           {"gain", result.gains[i]},
                           {"path_found", scores[i].path_found},
                           {"scores", scores_json<State>(s)}});
          }
          if (!json_out.empty()) open_out(json_out) << out.dump(2) << '\n';
        }
      });
    } else if (*eval_cmd) {
      EvaluateOptions opt;
      read_config(common.config).get_to(opt);
      if (!eval_envs.empty()) opt.environments = eval_envs;
      opt.seed = common.seed;
      std::vector<EnvironmentRun> runs;
      const auto result = evaluate_all(opt, &runs);
      write_reports(eval_dir, result);
      for (const auto& r : runs) {
        std::cout << r.environment << ": " << r.records << " records";
        if (std::any_of(r.shortfall.begin(), r.shortfall.end(), [](auto v) { return v > 0; }))
          std::cout << " (quota not met)";
        std::cout << '\n';
      }
      write_markdown(std::cout, result.table);
      std::cout << "reports in " << eval_dir << '\n';
    } else if (*self_cmd) {
      selftest::Options opt;
      opt.full = full;
      opt.seeds = selftest_seeds;
      auto results = selftest::run_all(opt);
      std::sort(results.begin(), results.end(), [](auto& a, auto& b) { return a.id < b.id; });
      std::size_t passed = 0;
      for (const auto& r : results) {
        selftest::print(std::cout, r);
        passed += r.passed ? 1 : 0;
      }
      std::cout << passed << '/' << results.size() << " checks passed\n";
      return passed == results.size() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
