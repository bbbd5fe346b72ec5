#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "hpl/demonstrator.hpp"
#include "hpl/gp.hpp"
#include "hpl/planner.hpp"

namespace hpl {

// Experiment configuration. Unset fields take per-family defaults; see
// RunConfig::defaults.
struct RunConfig {
  std::string env = "tube";
  std::uint64_t seed = 0;       // global seed; fit/optimizer/verify draw named substreams
  std::uint64_t task_seed = 1;  // instance seed for generated tasks
  int n_train = 20;
  int train_first = 0;
  int n_test = 20;
  int test_first = 1000;  // track: -1 selects the shipped layout
  int N = 10;
  int T = 5;
  double eta = 2.0;
  double beta = 0.0;
  double d_thresh = 2.0;
  OptimizerBudget budget;
  int step_cap = 2000;
  std::string out = "runs";
  std::string demo_dir;      // default <out>/demos
  std::string strategy_dir;  // default <out>/strategy
  FitConfig fit;
  int max_points = 300;
  DemoConfig demo;
  nlohmann::json env_params = nlohmann::json::object();
  int verify_samples = 1000;
  int verify_horizon = 500;

  static RunConfig defaults(const std::string& family);

  std::string demo_path() const { return demo_dir.empty() ? out + "/demos" : demo_dir; }
  std::string strategy_path() const { return strategy_dir.empty() ? out + "/strategy" : strategy_dir; }
  HplConfig hpl() const;

  // Throws ConfigError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  // Starts from defaults(j["env"]) and applies every present field; unknown
  // keys are rejected.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
};

}  // namespace hpl
