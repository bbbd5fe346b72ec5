#include "hpl/commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "hpl/errors.hpp"
#include "hpl/flappy.hpp"
#include "hpl/rng.hpp"
#include "hpl/strategy.hpp"
#include "hpl/tasks.hpp"

namespace hpl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  json j;
  in >> j;
  return j;
}

std::vector<EnvPtr> test_tasks(const RunConfig& cfg) {
  return generate_tasks(cfg.env, cfg.n_test, cfg.task_seed, cfg.test_first, cfg.env_params);
}

json describe_stats(const std::vector<double>& v) {
  if (v.empty()) return {{"n", 0}};
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  double sum = 0.0;
  for (double x : s) sum += x;
  const size_t n = s.size();
  const double median = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  return {{"n", n}, {"mean", sum / n}, {"median", median}, {"min", s.front()}, {"max", s.back()}};
}

json run_record(const RunResult& r) {
  return {{"env_id", r.execution.env_id},
          {"complete", r.execution.complete},
          {"feasible", r.execution.feasible},
          {"duration_s", r.execution.duration()},
          {"score", r.execution.score},
          {"steps", r.stats.steps},
          {"safety_steps", r.stats.safety_steps},
          {"mpc_steps", r.stats.mpc_steps},
          {"gate_rejections", r.stats.gate_rejections},
          {"violations", r.stats.violations},
          {"unsafe_safety_entries", r.stats.unsafe_safety_entries}};
}

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

json cmd_demo_gen(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = cfg.demo_path();
  fs::create_directories(dir);
  json index{{"family", cfg.env}, {"task_seed", cfg.task_seed}, {"env_params", cfg.env_params}, {"demos", json::array()}};
  int ok = 0;
  for (int i = 0; i < cfg.n_train; ++i) {
    const int idx = cfg.train_first + i;
    const EnvPtr env = make_env(cfg.env, cfg.task_seed, idx, cfg.env_params);
    const DemoResult d = demonstrate(env, substream_seed(cfg.seed, "demo", static_cast<std::uint64_t>(idx)), cfg.demo);
    json e{{"index", idx}, {"env_id", env->id()}};
    if (d.execution) {
      const std::string file = env->id() + ".csv";
      write_execution_csv(*d.execution, (dir / file).string());
      e["file"] = file;
      e["duration_s"] = d.execution->duration();
      e["score"] = d.execution->score;
      e["level"] = d.level;
      ++ok;
    } else {
      e["skipped"] = d.diagnostic;
      std::cerr << "warning: " << d.diagnostic << "\n";
    }
    index["demos"].push_back(e);
  }
  write_json(dir / "index.json", index);
  return {{"family", cfg.env}, {"demos", ok}, {"skipped", cfg.n_train - ok}, {"dir", dir.string()}};
}

json cmd_train(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = cfg.demo_path();
  const json index = read_json(dir / "index.json");
  if (index.at("family").get<std::string>() != cfg.env)
    throw ConfigError("config field 'env' does not match the demonstration corpus in " + dir.string());
  const auto task_seed = index.at("task_seed").get<std::uint64_t>();
  const json env_params = index.value("env_params", json::object());
  std::vector<Demonstration> demos;
  for (const auto& e : index.at("demos")) {
    if (!e.contains("file")) continue;
    EnvPtr env = make_env(cfg.env, task_seed, e.at("index").get<int>(), env_params);
    demos.push_back({env, read_execution_csv((dir / e.at("file").get<std::string>()).string())});
  }
  if (demos.empty()) throw std::runtime_error("no demonstrations in " + dir.string());
  const StrategyDataset ds = build_dataset(demos, cfg.N, cfg.T);
  const fs::path sdir = cfg.strategy_path();
  fs::create_directories(sdir);
  write_dataset_csv(ds, (sdir / "dataset.csv").string());
  TrainConfig tc;
  tc.fit = cfg.fit;
  tc.fit.seed = substream_seed(cfg.seed, "fit");
  tc.max_points = cfg.max_points;
  const Strategy s = train_strategy(ds, tc);
  s.save(sdir.string());
  return {{"family", cfg.env},       {"rows", ds.rows()},  {"demos", demos.size()},
          {"dir", sdir.string()},    {"N", cfg.N},         {"T", cfg.T},
          {"hash", s.content_hash()}};
}

json cmd_run(const RunConfig& cfg) {
  cfg.validate();
  const Strategy strategy = Strategy::load(cfg.strategy_path());
  if (strategy.family() != cfg.env) throw ConfigError("config field 'env' does not match the trained strategy");
  const SafetyPair safety = make_safety(cfg.env, cfg.env_params);
  const fs::path dir = fs::path(cfg.out) / "run";
  fs::create_directories(dir / "executions");
  fs::create_directories(dir / "logs");
  write_json(dir / "config.json", cfg.to_json());
  const std::string hash = strategy.content_hash();
  write_json(dir / "run_info.json", {{"seed", cfg.seed}, {"strategy_hash", hash}, {"strategy_dir", cfg.strategy_path()}});

  json tasks = json::array(), timing = json::array();
  std::vector<double> durations, scores;
  int violations = 0, complete = 0;
  const auto envs = test_tasks(cfg);
  for (size_t i = 0; i < envs.size(); ++i) {
    const EnvPtr& env = envs[i];
    const double t0 = now_s();
    const RunResult r = run_task(env, strategy, safety.safe_set, safety.policy, cfg.hpl(),
                                 substream_seed(cfg.seed, "optimizer", i), true);
    timing.push_back({{"env_id", env->id()}, {"wall_s", now_s() - t0}});
    write_execution_csv(r.execution, (dir / "executions" / (env->id() + ".csv")).string());
    std::ofstream log(dir / "logs" / (env->id() + ".jsonl"));
    for (const auto& l : r.logs) log << l.to_json().dump() << "\n";
    json rec = run_record(r);
    rec["x0_in_safe_set"] = safety.safe_set->contains(*env, env->initial_state());
    tasks.push_back(rec);
    violations += r.stats.violations;
    complete += r.execution.complete;
    if (r.execution.complete) durations.push_back(r.execution.duration());
    scores.push_back(r.execution.score);
  }
  const json summary{{"family", cfg.env},
                     {"seed", cfg.seed},
                     {"strategy_hash", hash},
                     {"tasks", tasks},
                     {"complete", complete},
                     {"violations", violations},
                     {"duration_s", describe_stats(durations)},
                     {"score", describe_stats(scores)}};
  write_json(dir / "summary.json", summary);
  write_json(dir / "timing.json", timing);
  return summary;
}

json cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  const Strategy strategy = Strategy::load(cfg.strategy_path());
  if (strategy.family() != cfg.env) throw ConfigError("config field 'env' does not match the trained strategy");
  const SafetyPair safety = make_safety(cfg.env, cfg.env_params);
  const fs::path dir = fs::path(cfg.out) / "eval";
  fs::create_directories(dir);
  write_json(dir / "config.json", cfg.to_json());

  std::ofstream csv(dir / "benchmark.csv");
  csv << "env_id,controller,complete,feasible,duration_s,score,steps,safety_steps,mpc_steps,gate_rejections,"
         "violations\n";
  std::map<std::string, std::vector<double>> dur, score;
  std::map<std::string, int> viol;
  auto record = [&](const std::string& ctl, const RunResult& r) {
    const auto& e = r.execution;
    csv << e.env_id << "," << ctl << "," << e.complete << "," << e.feasible << "," << e.duration() << ","
        << e.score << "," << r.stats.steps << "," << r.stats.safety_steps << "," << r.stats.mpc_steps << ","
        << r.stats.gate_rejections << "," << r.stats.violations << "\n";
    if (e.complete) dur[ctl].push_back(e.duration());
    score[ctl].push_back(e.score);
    viol[ctl] += r.stats.violations;
  };

  const int cap = cfg.step_cap;
  const auto envs = test_tasks(cfg);
  for (size_t i = 0; i < envs.size(); ++i) {
    const EnvPtr& env = envs[i];
    record("hpl", run_task(env, strategy, safety.safe_set, safety.policy, cfg.hpl(),
                           substream_seed(cfg.seed, "optimizer", i)));
    const SafetyPolicyPtr sp = safety.policy;
    record("safety", run_policy(env, [sp](const Environment& e, const State& x) { return sp->input(e, x); }, cap));
    const DemoResult d = demonstrate(env, substream_seed(cfg.seed, "demo", i), cfg.demo);
    if (d.execution) {
      RunResult r;
      r.execution = *d.execution;
      r.stats.steps = d.execution->duration_steps();
      record("demonstrator", r);
    }
    if (cfg.env == "flappy") {
      record("baseline", run_policy(env, [](const Environment& e, const State& x) {
               return flappy_baseline_input(dynamic_cast<const FlappyEnv&>(e), x);
             }, cap));
    }
  }

  std::ofstream table(dir / "table.csv");
  table << "controller,metric,n,mean,median,min,max,violations\n";
  json controllers = json::object();
  for (const auto& [ctl, v] : score) {
    const bool by_score = cfg.env == "flappy";
    const json st = describe_stats(by_score ? v : dur[ctl]);
    controllers[ctl] = {{by_score ? "score" : "duration_s", st}, {"violations", viol[ctl]}};
    table << ctl << "," << (by_score ? "score" : "duration_s") << "," << st.value("n", 0) << ","
          << st.value("mean", 0.0) << "," << st.value("median", 0.0) << "," << st.value("min", 0.0) << ","
          << st.value("max", 0.0) << "," << viol[ctl] << "\n";
  }
  const json summary{{"family", cfg.env}, {"seed", cfg.seed}, {"strategy_hash", strategy.content_hash()},
                     {"controllers", controllers}};
  write_json(dir / "summary.json", summary);
  return summary;
}

json cmd_verify_safe(const RunConfig& cfg) {
  cfg.validate();
  const SafetyPair safety = make_safety(cfg.env, cfg.env_params);
  const EnvPtr env = make_env(cfg.env, cfg.task_seed, cfg.test_first, cfg.env_params);
  const InvarianceReport rep = verify_invariance(*safety.safe_set, *safety.policy, *env, cfg.verify_samples,
                                                 cfg.verify_horizon, substream_seed(cfg.seed, "verify"));
  json j = rep.to_json();
  j["safe_set"] = safety.safe_set->params();
  write_json(fs::path(cfg.out) / "verify" / "report.json", j);
  return j;
}

}  // namespace hpl
