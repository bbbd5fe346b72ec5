#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hpl/environment.hpp"
#include "hpl/safety.hpp"
#include "hpl/strategy.hpp"
#include "hpl/targets.hpp"

namespace hpl {

struct OptimizerBudget {
  int population = 256;
  int elites = 32;
  int iterations = 20;
  double init_std = 0.3;  // fraction of the input range
  double smoothing = 0.8;
  double noise_correlation = 0.0;  // AR(1) coefficient of sampling noise along the horizon
  bool input_penalty = false;  // soft penalty on the strategy input boxes
  double input_penalty_weight = 1.0;
};

struct PlanResult {
  bool feasible = false;
  int H = 0;
  std::vector<Input> inputs;  // u_{0|k} .. u_{H-1|k}
  std::vector<State> states;  // x_{0|k} .. x_{H|k}
  double objective = 0.0;
  double slack = 0.0;  // constraint excess + terminal distance (0 when feasible)
};

using PadPolicy = std::function<Input(const State&)>;

// Shifting-horizon MPC towards slot H-1 of `list`. Continuous inputs use the
// cross-entropy method seeded with `warm` sequences (extended by `pad`);
// binary inputs are solved exactly by dynamic programming over distinct
// states.
PlanResult solve_mpc(const State& x, const SetList& list, int H, const Environment& env,
                     const OptimizerBudget& budget, std::uint64_t seed,
                     const std::vector<std::vector<Input>>& warm = {}, const PadPolicy& pad = {});

// Exact binary-input solutions for every horizon 1..H_max in one forward pass;
// entry H-1 holds horizon H (infeasible when slot H-1 is empty).
std::vector<PlanResult> solve_binary_all(const State& x, const SetList& list, int H_max, const Environment& env,
                                         const OptimizerBudget& budget);

// Horizon rule: the largest s in [1, T] with slot s-1 non-empty and
// feasible(s) true, scanned in decreasing order.
std::optional<int> select_horizon_scan(int T, const std::function<bool(int)>& nonempty,
                                       const std::function<bool(int)>& feasible);

struct HorizonChoice {
  std::optional<int> H;
  PlanResult plan;
};
HorizonChoice select_horizon(const State& x, const SetList& list, const Environment& env,
                             const OptimizerBudget& budget, std::uint64_t seed,
                             const std::vector<std::vector<Input>>& warm = {}, const PadPolicy& pad = {});

// Input applied by the safety policy along a rollout of length H from x.
std::vector<Input> safety_rollout(const Environment& env, const SafetyPolicy& sp, const State& x, int H);

struct HplConfig {
  int N = 10;
  int T = 5;
  double eta = 2.0;
  double beta = 0.0;
  double d_thresh = 1.0;
  OptimizerBudget budget;
  int step_cap = 5000;
};

enum class Mode { MPC, SafetyControl };

struct StepLog {
  int k = 0;
  Mode mode = Mode::SafetyControl;
  int H = 0;
  Vec C;
  bool accepted = false;
  nlohmann::json target;
  Input u;
  double objective = 0.0;
  double wall_ms = 0.0;
  bool in_safe_set = true;  // recorded on entry into safety control
  nlohmann::json to_json() const;
};

// Closed-loop HPL control policy.
class HplController {
 public:
  HplController(const Strategy& strategy, SafeSetPtr ss, SafetyPolicyPtr sp, HplConfig cfg, std::uint64_t seed);

  Input step(const Environment& env, const State& x, StepLog* log = nullptr);

  const SetList& set_list() const { return list_; }
  Mode mode() const { return mode_; }
  int k() const { return k_; }

 private:
  const Strategy& strategy_;
  SafeSetPtr ss_;
  SafetyPolicyPtr sp_;
  HplConfig cfg_;
  std::uint64_t seed_;
  SetList list_;
  Mode mode_ = Mode::SafetyControl;
  int k_ = 0;
  std::vector<Input> prev_plan_;
};

struct RunStats {
  int steps = 0;
  int safety_steps = 0;
  int mpc_steps = 0;
  int gate_rejections = 0;
  int violations = 0;            // state or input constraint violations
  int unsafe_safety_entries = 0; // safety-mode entries outside X_E
  double wall_s = 0.0;
  nlohmann::json to_json() const;
};

struct RunResult {
  Execution execution;
  RunStats stats;
  std::vector<StepLog> logs;
};

// Runs until the task target set is reached, the step cap is hit, or the
// first constraint violation (the offending state is recorded).
RunResult run_task(const EnvPtr& env, const Strategy& strategy, SafeSetPtr ss, SafetyPolicyPtr sp,
                   const HplConfig& cfg, std::uint64_t seed, bool keep_logs = false);

using FeedbackPolicy = std::function<Input(const Environment&, const State&)>;
RunResult run_policy(const EnvPtr& env, const FeedbackPolicy& policy, int step_cap);

}  // namespace hpl
