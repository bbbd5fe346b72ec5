#include "hpl/config.hpp"

#include <fstream>
#include <set>

#include "hpl/errors.hpp"

namespace hpl {

namespace {

using nlohmann::json;

template <class T>
void read(const json& j, const char* key, const std::string& prefix, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + prefix + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& prefix) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown config field '" + prefix + it.key() + "'");
}

const json& object_at(const json& j, const char* key) {
  const json& o = j.at(key);
  if (!o.is_object()) throw ConfigError(std::string("config field '") + key + "' must be an object");
  return o;
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("config field '" + field + "' " + what);
}

}  // namespace

RunConfig RunConfig::defaults(const std::string& family) {
  RunConfig c;
  c.env = family;
  if (family == "tube") {
    c.N = 10;
    c.T = 5;
    c.d_thresh = 2.0;
    c.n_train = 20;
    c.n_test = 20;
    c.step_cap = 2000;
    c.budget.population = 64;
    c.budget.elites = 8;
    c.budget.iterations = 8;
  } else if (family == "track") {
    c.N = 15;
    c.T = 20;
    c.eta = 3.0;
    c.d_thresh = 1.0;
    c.n_train = 6;
    c.n_test = 1;
    c.step_cap = 3000;
    c.budget.population = 128;
    c.budget.elites = 16;
    c.budget.iterations = 12;
    c.budget.noise_correlation = 0.5;
  } else if (family == "flappy") {
    c.N = 45;
    c.T = 30;
    c.d_thresh = 10.0;
    c.n_train = 15;
    c.n_test = 50;
    c.step_cap = 12000;
  } else {
    throw ConfigError("config field 'env' must be one of tube, track, flappy (got '" + family + "')");
  }
  return c;
}

HplConfig RunConfig::hpl() const {
  HplConfig h;
  h.N = N;
  h.T = T;
  h.eta = eta;
  h.beta = beta;
  h.d_thresh = d_thresh;
  h.budget = budget;
  h.step_cap = step_cap;
  return h;
}

void RunConfig::validate() const {
  require(env == "tube" || env == "track" || env == "flappy", "env", "must be one of tube, track, flappy");
  require(n_train >= 0, "n_train", "must be >= 0");
  require(n_test >= 0, "n_test", "must be >= 0");
  require(N > 0, "N", "must be positive");
  require(T > 0, "T", "must be positive");
  require(eta > 0.0, "eta", "must be positive");
  require(beta >= 0.0 && beta <= 1.0, "beta", "must lie in [0, 1]");
  require(d_thresh > 0.0, "d_thresh", "must be positive");
  require(step_cap >= 0, "step_cap", "must be >= 0");
  require(!out.empty(), "out", "must be a directory path");
  require(budget.population >= 1, "budget.population", "must be >= 1");
  require(budget.elites >= 1 && budget.elites <= budget.population, "budget.elites", "must lie in [1, population]");
  require(budget.iterations >= 1, "budget.iterations", "must be >= 1");
  require(budget.init_std > 0.0, "budget.init_std", "must be positive");
  require(budget.smoothing > 0.0 && budget.smoothing <= 1.0, "budget.smoothing", "must lie in (0, 1]");
  require(budget.noise_correlation >= 0.0 && budget.noise_correlation < 1.0, "budget.noise_correlation",
          "must lie in [0, 1)");
  require(budget.input_penalty_weight >= 0.0, "budget.input_penalty_weight", "must be >= 0");
  require(fit.restarts >= 1, "fit.restarts", "must be >= 1");
  require(fit.iterations >= 0, "fit.iterations", "must be >= 0");
  require(fit.init_lo > 0.0 && fit.init_hi >= fit.init_lo, "fit.init_lo", "must be positive and <= fit.init_hi");
  require(max_points >= 2, "max_points", "must be >= 2");
  require(demo.step_cap >= 1, "demo.step_cap", "must be >= 1");
  require(demo.flappy_horizon >= 1, "demo.flappy_horizon", "must be >= 1");
  require(verify_samples >= 1, "verify_samples", "must be >= 1");
  require(verify_horizon >= 1, "verify_horizon", "must be >= 1");
  require(env_params.is_object(), "env_params", "must be an object");
}

nlohmann::json RunConfig::to_json() const {
  return {{"env", env},
          {"seed", seed},
          {"task_seed", task_seed},
          {"n_train", n_train},
          {"train_first", train_first},
          {"n_test", n_test},
          {"test_first", test_first},
          {"N", N},
          {"T", T},
          {"eta", eta},
          {"beta", beta},
          {"d_thresh", d_thresh},
          {"budget",
           {{"population", budget.population},
            {"elites", budget.elites},
            {"iterations", budget.iterations},
            {"init_std", budget.init_std},
            {"smoothing", budget.smoothing},
            {"noise_correlation", budget.noise_correlation},
            {"input_penalty", budget.input_penalty},
            {"input_penalty_weight", budget.input_penalty_weight}}},
          {"step_cap", step_cap},
          {"out", out},
          {"demo_dir", demo_dir},
          {"strategy_dir", strategy_dir},
          {"fit",
           {{"restarts", fit.restarts},
            {"iterations", fit.iterations},
            {"init_lo", fit.init_lo},
            {"init_hi", fit.init_hi},
            {"tol", fit.tol}}},
          {"max_points", max_points},
          {"demo",
           {{"step_cap", demo.step_cap},
            {"flappy_horizon", demo.flappy_horizon},
            {"flappy_beam", demo.flappy_beam}}},
          {"env_params", env_params},
          {"verify_samples", verify_samples},
          {"verify_horizon", verify_horizon}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::string family = "tube";
  read(j, "env", "", family);
  RunConfig c = defaults(family);
  reject_unknown(j,
                 {"env", "seed", "task_seed", "n_train", "train_first", "n_test", "test_first", "N", "T", "eta",
                  "beta", "d_thresh", "budget", "step_cap", "out", "demo_dir", "strategy_dir", "fit", "max_points",
                  "demo", "env_params", "verify_samples", "verify_horizon"},
                 "");
  read(j, "seed", "", c.seed);
  read(j, "task_seed", "", c.task_seed);
  read(j, "n_train", "", c.n_train);
  read(j, "train_first", "", c.train_first);
  read(j, "n_test", "", c.n_test);
  read(j, "test_first", "", c.test_first);
  read(j, "N", "", c.N);
  read(j, "T", "", c.T);
  read(j, "eta", "", c.eta);
  read(j, "beta", "", c.beta);
  read(j, "d_thresh", "", c.d_thresh);
  read(j, "step_cap", "", c.step_cap);
  read(j, "out", "", c.out);
  read(j, "demo_dir", "", c.demo_dir);
  read(j, "strategy_dir", "", c.strategy_dir);
  read(j, "max_points", "", c.max_points);
  read(j, "verify_samples", "", c.verify_samples);
  read(j, "verify_horizon", "", c.verify_horizon);
  if (j.contains("env_params")) {
    c.env_params = j.at("env_params");
    if (!c.env_params.is_object()) throw ConfigError("config field 'env_params' must be an object");
  }
  if (j.contains("budget")) {
    const json& b = object_at(j, "budget");
    reject_unknown(b,
                   {"population", "elites", "iterations", "init_std", "smoothing", "noise_correlation",
                    "input_penalty", "input_penalty_weight"},
                   "budget.");
    read(b, "population", "budget.", c.budget.population);
    read(b, "elites", "budget.", c.budget.elites);
    read(b, "iterations", "budget.", c.budget.iterations);
    read(b, "init_std", "budget.", c.budget.init_std);
    read(b, "smoothing", "budget.", c.budget.smoothing);
    read(b, "noise_correlation", "budget.", c.budget.noise_correlation);
    read(b, "input_penalty", "budget.", c.budget.input_penalty);
    read(b, "input_penalty_weight", "budget.", c.budget.input_penalty_weight);
  }
  if (j.contains("fit")) {
    const json& f = object_at(j, "fit");
    reject_unknown(f, {"restarts", "iterations", "init_lo", "init_hi", "tol"}, "fit.");
    read(f, "restarts", "fit.", c.fit.restarts);
    read(f, "iterations", "fit.", c.fit.iterations);
    read(f, "init_lo", "fit.", c.fit.init_lo);
    read(f, "init_hi", "fit.", c.fit.init_hi);
    read(f, "tol", "fit.", c.fit.tol);
  }
  if (j.contains("demo")) {
    const json& d = object_at(j, "demo");
    reject_unknown(d, {"step_cap", "flappy_horizon", "flappy_beam"}, "demo.");
    read(d, "step_cap", "demo.", c.demo.step_cap);
    read(d, "flappy_horizon", "demo.", c.demo.flappy_horizon);
    read(d, "flappy_beam", "demo.", c.demo.flappy_beam);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace hpl
