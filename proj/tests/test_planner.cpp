#include <doctest.h>

#include "fixtures.hpp"
#include "hpl/errors.hpp"
#include "hpl/planner.hpp"
#include "hpl/tasks.hpp"
#include "hpl/tube.hpp"
#include "oracles.hpp"

using namespace hpl;

namespace {

void check_plan(const PlanResult& p, const State& x, const SetList& list, const Environment& env) {
  REQUIRE(p.feasible);
  REQUIRE(static_cast<int>(p.inputs.size()) == p.H);
  State s = x;
  for (int j = 0; j < p.H; ++j) {
    CHECK(env.input_space().contains(p.inputs[j]));
    s = env.step(s, p.inputs[j]);
    CHECK((s - p.states[j + 1]).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(env.constraints_ok(s));
  }
  CHECK(list[p.H - 1].contains(s));
}

}  // namespace

TEST_CASE("horizon rule examples") {
  auto nonempty = [](int j) { return j == 1 || j == 4; };
  CHECK(select_horizon_scan(5, nonempty, [](int) { return true; }) == 5);
  CHECK(select_horizon_scan(5, nonempty, [](int s) { return s == 2; }) == 2);
  CHECK_FALSE(select_horizon_scan(5, [](int) { return false; }, [](int) { return true; }).has_value());
}

TEST_CASE("horizon rule equals a brute-force scan") {
  Rng rng(17);
  for (int t = 0; t < 10000; ++t) {
    const int T = 1 + static_cast<int>(rng() % 6);
    std::vector<bool> ne(T), fe(T + 1);
    for (int j = 0; j < T; ++j) ne[j] = rng() % 2;
    for (int s = 1; s <= T; ++s) fe[s] = rng() % 2;
    std::optional<int> brute;
    for (int s = 1; s <= T; ++s)
      if (ne[s - 1] && fe[s]) brute = s;
    CHECK(select_horizon_scan(T, [&](int j) { return ne[j]; }, [&](int s) { return fe[s]; }) == brute);
  }
}

TEST_CASE("binary solver equals exhaustive enumeration") {
  Rng rng(23);
  OptimizerBudget b;
  int feasible = 0;
  for (int t = 0; t < 400; ++t) {
    const int H = 1 + static_cast<int>(rng() % 8);
    auto c = oracles::random_flappy_case(rng, H);
    if (c.list[H - 1].is_empty()) continue;
    const PlanResult p = solve_mpc(c.x, c.list, H, *c.view, b, 0);
    const auto e = oracles::enumerate_binary(c.x, c.list, H, *c.view);
    CHECK(p.feasible == e.feasible);
    if (p.feasible && e.feasible) {
      ++feasible;
      CHECK(std::abs(p.objective - e.objective) <= 1e-9);
      check_plan(p, c.x, c.list, *c.view);
    }
  }
  CHECK(feasible > 20);
}

TEST_CASE("binary select_horizon equals per-horizon solves") {
  Rng rng(29);
  OptimizerBudget b;
  for (int t = 0; t < 300; ++t) {
    const int T = 1 + static_cast<int>(rng() % 6);
    auto c = oracles::random_flappy_case(rng, T, 0.4);
    const HorizonChoice h = select_horizon(c.x, c.list, *c.view, b, 0);
    std::optional<int> brute;
    for (int s = 1; s <= T; ++s)
      if (!c.list[s - 1].is_empty() && solve_mpc(c.x, c.list, s, *c.view, b, 0).feasible) brute = s;
    CHECK(h.H == brute);
    if (h.H) check_plan(h.plan, c.x, c.list, *c.view);
  }
}

TEST_CASE("continuous solver on the double integrator") {
  auto env = make_env("tube", 1, 0);
  auto safety = make_safety("tube");
  const State x = env->initial_state();
  const int H = 5;
  OptimizerBudget b;
  b.population = 128;
  b.iterations = 15;

  // coarse bang-bang grid: constant inputs whose trajectories stay feasible
  std::vector<State> reach;
  const auto& is = env->input_space();
  for (int a = 0; a <= 4; ++a)
    for (int c = 0; c <= 4; ++c) {
      Input u(2);
      u << is.lo(0) + a * 0.25 * (is.hi(0) - is.lo(0)), is.lo(1) + c * 0.25 * (is.hi(1) - is.lo(1));
      State s = x;
      bool ok = true;
      for (int j = 0; j < H && ok; ++j) {
        s = env->step(s, u);
        ok = env->constraints_ok(s);
      }
      if (ok) reach.push_back(s);
    }
  REQUIRE(reach.size() >= 3);
  for (size_t r = 0; r < reach.size(); r += 2) {
    const Vec g = env->strategy_state(reach[r], x);
    SetList list(H);
    for (int j = 0; j < H - 1; ++j) list.push(TargetSet::empty());
    list.push(lift_box(g.array() - 0.05, g.array() + 0.05, safety.safe_set, env, x, 1.0, 0, H));
    const PlanResult p = solve_mpc(x, list, H, *env, b, 3);
    check_plan(p, x, list, *env);
    // deterministic per seed
    const PlanResult p2 = solve_mpc(x, list, H, *env, b, 3);
    CHECK(p2.objective == p.objective);
    CHECK(p2.inputs == p.inputs);
  }

  // 5 steps at 0.1 s cannot cover 3 m from rest
  SetList far(H);
  Vec lo(2), hi(2);
  lo << 3.0, -0.1;
  hi << 3.2, 0.1;
  for (int j = 0; j < H - 1; ++j) far.push(TargetSet::empty());
  far.push(lift_box(lo, hi, safety.safe_set, env, x, 1.0, 0, H));
  const PlanResult q = solve_mpc(x, far, H, *env, b, 3);
  CHECK_FALSE(q.feasible);
  CHECK(q.slack > 0.0);

  CHECK_THROWS_AS(solve_mpc(x, far, H + 1, *env, b, 3), ContractError);
  SetList empty(H);
  CHECK_THROWS_AS(solve_mpc(x, empty, H, *env, b, 3), ContractError);
  CHECK_FALSE(select_horizon(x, empty, *env, b, 3).H.has_value());
}

TEST_CASE("safety rollout") {
  auto env = make_env("tube", 1, 0);
  auto safety = make_safety("tube");
  const auto u = safety_rollout(*env, *safety.policy, env->initial_state(), 7);
  REQUIRE(u.size() == 7);
  State x = env->initial_state();
  for (const auto& ui : u) {
    CHECK(ui == safety.policy->input(*env, x));
    x = env->step(x, ui);
  }
}

TEST_CASE("closed loop") {
  const Strategy& strat = fixtures::tiny_tube_strategy();
  auto safety = make_safety("tube");
  HplConfig cfg;
  cfg.N = 10;
  cfg.T = 5;
  cfg.d_thresh = 2.0;
  cfg.budget.population = 48;
  cfg.budget.elites = 6;
  cfg.budget.iterations = 6;

  SUBCASE("step cap 0 gives an empty incomplete execution") {
    HplConfig c = cfg;
    c.step_cap = 0;
    const RunResult r = run_task(make_env("tube", 1, 1000), strat, safety.safe_set, safety.policy, c, 1);
    CHECK(r.execution.duration_steps() == 0);
    CHECK(r.execution.states.size() == 1);
    CHECK_FALSE(r.execution.complete);
    CHECK(r.execution.feasible);
  }

  SUBCASE("a gate that rejects everything reproduces the safety policy") {
    HplConfig c = cfg;
    c.d_thresh = 1e-12;
    c.step_cap = 300;
    auto env = make_env("tube", 1, 1001);
    const RunResult r = run_task(env, strat, safety.safe_set, safety.policy, c, 1, true);
    const SafetyPolicyPtr sp = safety.policy;
    const RunResult s = run_policy(env, [sp](const Environment& e, const State& x) { return sp->input(e, x); }, 300);
    CHECK(r.execution.inputs == s.execution.inputs);
    CHECK(r.stats.safety_steps == r.stats.steps);
    CHECK(r.stats.gate_rejections == r.stats.steps);
    for (const auto& l : r.logs) CHECK(l.mode == Mode::SafetyControl);
  }

  SUBCASE("feasible runs that return to the safe set before safety mode") {
    for (int i = 0; i < 2; ++i) {
      auto env = make_env("tube", 1, 1002 + i);
      REQUIRE(safety.safe_set->contains(*env, env->initial_state()));
      const RunResult r = run_task(env, strat, safety.safe_set, safety.policy, cfg, 7, true);
      CHECK(r.execution.complete);
      CHECK(r.stats.violations == 0);
      CHECK(r.stats.unsafe_safety_entries == 0);
      CHECK(r.stats.mpc_steps > 0);
      for (size_t k = 0; k < r.execution.inputs.size(); ++k) {
        CHECK(env->input_space().contains(r.execution.inputs[k]));
        CHECK(env->constraints_ok(r.execution.states[k + 1]));
      }
      const ExecutionCheck chk = check_execution(*env, r.execution);
      CHECK(chk.ok());
      // mode follows the set list: safety control iff no horizon was found
      for (const auto& l : r.logs) CHECK((l.mode == Mode::SafetyControl) == (l.H == 0));
      const auto j = r.logs.front().to_json();
      for (const char* key : {"k", "mode", "H", "C", "target", "u", "objective", "wall_ms"}) CHECK(j.contains(key));
    }
  }

  SUBCASE("mismatched horizons are rejected") {
    HplConfig c = cfg;
    c.T = 6;
    CHECK_THROWS_AS(HplController(strat, safety.safe_set, safety.policy, c, 0), ConfigError);
  }
}
