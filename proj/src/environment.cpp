#include "hpl/environment.hpp"

#include <cmath>

namespace hpl {

bool InputSpace::contains(const Input& u) const {
  if (u.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i) {
    if (!std::isfinite(u(i))) return false;
    if (kind == InputKind::Binary) {
      if (u(i) != 0.0 && u(i) != 1.0) return false;
    } else if (u(i) < lo(i) || u(i) > hi(i)) {
      return false;
    }
  }
  return true;
}

ExecutionCheck check_execution(const Environment& env, const Execution& ex, double tol) {
  ExecutionCheck c;
  auto mark = [&](int k) {
    if (c.first_bad_step < 0) c.first_bad_step = k;
  };
  if (ex.states.size() != ex.inputs.size() + 1) {
    c.dynamics_ok = false;
    mark(0);
    return c;
  }
  for (size_t k = 0; k < ex.states.size(); ++k) {
    if (!env.constraints_ok(ex.states[k])) {
      c.states_ok = false;
      mark(static_cast<int>(k));
    }
    if (k + 1 < ex.states.size()) {
      if (!env.input_space().contains(ex.inputs[k])) {
        c.inputs_ok = false;
        mark(static_cast<int>(k));
      }
      const State nx = env.step(ex.states[k], ex.inputs[k]);
      if ((nx - ex.states[k + 1]).lpNorm<Eigen::Infinity>() > tol) {
        c.dynamics_ok = false;
        mark(static_cast<int>(k));
      }
    }
  }
  c.reaches_target = env.task_done(ex.states.back());
  return c;
}

}  // namespace hpl
