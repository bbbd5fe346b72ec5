#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "hpl/types.hpp"

namespace hpl {

enum class InputKind { Box, Binary };

struct InputSpace {
  InputKind kind = InputKind::Box;
  Vec lo, hi;  // Box bounds; Binary uses {0,1} per dimension
  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Input& u) const;
};

// One task instance: dynamics f, constraints X(Theta), descriptor Theta and
// projections. Instances are immutable after construction.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string family() const = 0;
  virtual std::string id() const = 0;
  virtual int state_dim() const = 0;
  virtual const InputSpace& input_space() const = 0;
  virtual double dt() const = 0;
  virtual State initial_state() const = 0;
  virtual State step(const State& x, const Input& u) const = 0;

  // 0 iff x lies in X(Theta); otherwise a positive constraint-excess measure.
  virtual double violation(const State& x) const = 0;
  bool constraints_ok(const State& x) const { return violation(x) == 0.0; }

  virtual int theta_dim() const = 0;
  virtual Vec theta(const State& x) const = 0;
  // Rows theta_k .. theta_{k+N}; padded with the terminal value past the end.
  virtual Mat forecast(const State& x, int N) const = 0;
  virtual bool task_done(const State& x) const = 0;
  // Task score at x (pipes passed for flappy); 0 where not meaningful.
  virtual int score(const State&) const { return 0; }

  // Strategy state g(x, Theta), measured relative to `anchor` (the state at
  // which the strategy was queried) where the coordinate is cumulative.
  virtual int strategy_dim() const = 0;
  virtual Vec strategy_state(const State& x, const State& anchor) const = 0;
  // Strategy input r(u, Theta).
  virtual int strategy_input_dim() const { return input_space().dim(); }
  virtual Vec strategy_input(const Input& u) const { return u; }
  // State part of the GP query; defaults to x itself.
  virtual Vec query_state(const State& x) const { return x; }

  // Environment knowledge available at x. Planners and target sets bind to
  // this view; families with partial observability return a restricted copy.
  virtual std::shared_ptr<const Environment> view_at(const State& x) const = 0;

  virtual nlohmann::json describe() const = 0;
};

using EnvPtr = std::shared_ptr<const Environment>;

struct Execution {
  std::string env_id;
  std::string family;
  double dt = 0.0;
  std::vector<State> states;  // x_0 .. x_D
  std::vector<Input> inputs;  // u_0 .. u_{D-1}
  bool complete = false;      // reached the task target set
  bool feasible = true;       // every state and input satisfied the constraints
  int score = 0;              // task-specific (pipes passed for flappy)

  int duration_steps() const { return static_cast<int>(inputs.size()); }
  double duration() const { return dt * duration_steps(); }
};

// Re-simulates and re-checks an execution against env (Eq.-6 style checks).
struct ExecutionCheck {
  bool dynamics_ok = true;
  bool states_ok = true;
  bool inputs_ok = true;
  bool reaches_target = false;
  int first_bad_step = -1;
  bool feasible() const { return dynamics_ok && states_ok && inputs_ok; }
  bool ok() const { return feasible() && reaches_target; }
};
ExecutionCheck check_execution(const Environment& env, const Execution& ex, double tol = 1e-9);

void write_execution_csv(const Execution& ex, const std::string& path);
Execution read_execution_csv(const std::string& path);

}  // namespace hpl
