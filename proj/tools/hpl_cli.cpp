// hpl: experiment driver. Flags override the matching config fields.
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "hpl/commands.hpp"
#include "hpl/errors.hpp"

namespace {

using nlohmann::json;

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

json load_config_json(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw hpl::ConfigError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw hpl::ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical predictive learning: demonstrations, strategy training, closed-loop runs"};
  app.require_subcommand(1);

  std::string config_path, out, env;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "global seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--env", env, "task family")->check(CLI::IsMember({"tube", "track", "flappy"}));

  struct Sub {
    const char* name;
    const char* help;
    json (*fn)(const hpl::RunConfig&);
  };
  const Sub subs[] = {
      {"demo-gen", "write demonstrations for the training tasks", hpl::cmd_demo_gen},
      {"train", "fit the GP strategy from stored demonstrations", hpl::cmd_train},
      {"run", "run HPL on the test tasks", hpl::cmd_run},
      {"eval", "benchmark HPL against safety-only and the demonstrator", hpl::cmd_eval},
      {"verify-safe", "sampled invariance check of the shipped safe set", hpl::cmd_verify_safe},
  };
  for (const auto& s : subs) app.add_subcommand(s.name, s.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  hpl::RunConfig cfg;
  try {
    json j = load_config_json(config_path);
    if (!j.is_object()) throw hpl::ConfigError("config must be a JSON object");
    if (!env.empty()) j["env"] = env;
    if (seed) j["seed"] = *seed;
    if (!out.empty()) j["out"] = out;
    cfg = hpl::RunConfig::from_json(j);
  } catch (const hpl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  for (const auto& s : subs) {
    if (!app.got_subcommand(s.name)) continue;
    try {
      const json result = s.fn(cfg);
      std::cout << result.dump(2) << "\n";
      if (std::string(s.name) == "verify-safe" && !result.at("violations").empty()) {
        std::cerr << "safe-set invariance violated\n";
        return kRuntimeError;
      }
      return 0;
    } catch (const hpl::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfigError;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kRuntimeError;
    }
  }
  return kRuntimeError;
}
