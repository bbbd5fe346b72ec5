#pragma once

#include <json.hpp>

#include "hpl/config.hpp"

namespace hpl {

// Offline and online phases as reusable steps. Each writes under cfg.out (or
// the configured demo/strategy directories) and returns a summary.

// Demonstrations for the training tasks: <demo_dir>/<env_id>.csv plus
// index.json. Instances the demonstrator cannot solve are listed as skipped.
nlohmann::json cmd_demo_gen(const RunConfig& cfg);

// Dataset and GP strategy from the demonstration corpus: <strategy_dir>/.
nlohmann::json cmd_train(const RunConfig& cfg);

// Closed-loop HPL on the test tasks: <out>/run/ holds config.json,
// run_info.json (seed, strategy hash), summary.json (deterministic per
// config and seed), timing.json, executions/*.csv and logs/*.jsonl.
nlohmann::json cmd_run(const RunConfig& cfg);

// HPL against safety-only and the demonstrator (and, for flappy, the
// center-tracking baseline): <out>/eval/benchmark.csv, table.csv,
// summary.json.
nlohmann::json cmd_eval(const RunConfig& cfg);

// Sampled invariance check of the shipped safe set on the first test task:
// <out>/verify/report.json.
nlohmann::json cmd_verify_safe(const RunConfig& cfg);

}  // namespace hpl
