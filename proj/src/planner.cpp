#include "hpl/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "hpl/errors.hpp"
#include "hpl/rng.hpp"

namespace hpl {

namespace {

struct Evaluated {
  bool feasible = false;
  double slack = 0.0;
  double objective = 0.0;
  std::vector<State> states;
};

double input_box_penalty(const SetList& list, int j, const Input& u, const Environment& env) {
  // slot j is due at k + j + 1, so u_j is the last input before it.
  const auto& t = list[j];
  if (t.is_empty() || t.input_lo().size() == 0) return 0.0;
  const Vec r = env.strategy_input(u);
  double d = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i)
    d += std::max(0.0, t.input_lo()(i) - r(i)) + std::max(0.0, r(i) - t.input_hi()(i));
  return d;
}

Evaluated evaluate_sequence(const State& x0, const SetList& list, int H, const Environment& env,
                            const std::vector<Input>& u, const OptimizerBudget& b) {
  Evaluated e;
  e.states.reserve(static_cast<size_t>(H + 1));
  e.states.push_back(x0);
  double viol = 0.0;
  for (int j = 0; j < H; ++j) {
    const State nx = env.step(e.states.back(), u[static_cast<size_t>(j)]);
    viol += env.violation(nx);
    e.states.push_back(nx);
    if (b.input_penalty) e.objective += b.input_penalty_weight * input_box_penalty(list, j, u[static_cast<size_t>(j)], env);
  }
  for (int j = 1; j < H; ++j) {
    const auto& t = list[j - 1];
    if (!t.is_empty()) e.objective += t.distance(e.states[static_cast<size_t>(j)]);
  }
  const double term = list[H - 1].distance(e.states.back());
  e.slack = viol + term;
  e.feasible = viol == 0.0 && term == 0.0;
  return e;
}

PlanResult to_result(int H, std::vector<Input> u, Evaluated e) {
  PlanResult r;
  r.H = H;
  r.feasible = e.feasible;
  r.inputs = std::move(u);
  r.states = std::move(e.states);
  r.objective = e.objective;
  r.slack = e.slack;
  return r;
}

std::vector<Input> extend(const State& x0, const std::vector<Input>& seq, int H, const Environment& env,
                          const PadPolicy& pad) {
  std::vector<Input> out;
  out.reserve(static_cast<size_t>(H));
  State x = x0;
  const auto& is = env.input_space();
  for (int j = 0; j < H; ++j) {
    Input u;
    if (j < static_cast<int>(seq.size())) u = seq[static_cast<size_t>(j)];
    else if (pad) u = pad(x);
    else u = Input::Zero(is.dim());
    for (int i = 0; i < is.dim(); ++i) u(i) = std::clamp(u(i), is.lo(i), is.hi(i));
    out.push_back(u);
    x = env.step(x, u);
  }
  return out;
}

PlanResult solve_cem(const State& x0, const SetList& list, int H, const Environment& env,
                     const OptimizerBudget& b, std::uint64_t seed, const std::vector<std::vector<Input>>& warm,
                     const PadPolicy& pad) {
  const auto& is = env.input_space();
  const int m = is.dim();
  Rng rng = substream(seed, "cem", static_cast<std::uint64_t>(H));

  std::vector<std::vector<Input>> seeds;
  for (const auto& w : warm) seeds.push_back(extend(x0, w, H, env, pad));
  if (seeds.empty()) seeds.push_back(extend(x0, {}, H, env, pad));

  Mat mean(H, m), sd(H, m);
  for (int j = 0; j < H; ++j) {
    mean.row(j) = seeds[0][static_cast<size_t>(j)].transpose();
    for (int i = 0; i < m; ++i) sd(j, i) = b.init_std * (is.hi(i) - is.lo(i));
  }

  struct Cand {
    std::vector<Input> u;
    Evaluated e;
    int index;
  };
  auto better = [](const Cand& a, const Cand& c) {
    if (a.e.feasible != c.e.feasible) return a.e.feasible;
    const double ka = a.e.feasible ? a.e.objective : a.e.slack;
    const double kc = c.e.feasible ? c.e.objective : c.e.slack;
    if (ka != kc) return ka < kc;
    return a.index < c.index;
  };

  std::vector<Cand> elites;
  std::optional<Cand> best;
  const int E = std::max(1, std::min(b.elites, b.population));
  for (int it = 0; it < std::max(1, b.iterations); ++it) {
    std::vector<Cand> pop;
    pop.reserve(static_cast<size_t>(b.population + E));
    int idx = 0;
    const size_t target = static_cast<size_t>(b.population) + elites.size();
    for (auto& c : elites) {
      c.index = idx++;
      pop.push_back(std::move(c));
    }
    if (it == 0) {
      for (auto& s : seeds) {
        Evaluated e = evaluate_sequence(x0, list, H, env, s, b);
        pop.push_back({std::move(s), std::move(e), idx++});
      }
    }
    const double rc = std::clamp(b.noise_correlation, 0.0, 0.999), rs = std::sqrt(1.0 - rc * rc);
    while (pop.size() < target) {
      std::vector<Input> u(static_cast<size_t>(H), Input(m));
      Vec eps = Vec::Zero(m);
      for (int j = 0; j < H; ++j)
        for (int i = 0; i < m; ++i) {
          eps(i) = j == 0 ? normal(rng) : rc * eps(i) + rs * normal(rng);
          u[static_cast<size_t>(j)](i) = std::clamp(mean(j, i) + sd(j, i) * eps(i), is.lo(i), is.hi(i));
        }
      Evaluated e = evaluate_sequence(x0, list, H, env, u, b);
      pop.push_back({std::move(u), std::move(e), idx++});
    }
    std::sort(pop.begin(), pop.end(), better);
    if (!best || better(pop.front(), *best)) best = pop.front();
    if (best->e.feasible && best->e.objective == 0.0) break;
    elites.assign(std::make_move_iterator(pop.begin()),
                  std::make_move_iterator(pop.begin() + std::min<size_t>(static_cast<size_t>(E), pop.size())));
    Mat nm = Mat::Zero(H, m), nv = Mat::Zero(H, m);
    for (const auto& c : elites)
      for (int j = 0; j < H; ++j) nm.row(j) += c.u[static_cast<size_t>(j)].transpose();
    nm /= static_cast<double>(elites.size());
    for (const auto& c : elites)
      for (int j = 0; j < H; ++j)
        nv.row(j) += (c.u[static_cast<size_t>(j)].transpose() - nm.row(j)).array().square().matrix();
    nv /= static_cast<double>(elites.size());
    mean = b.smoothing * nm + (1.0 - b.smoothing) * mean;
    sd = b.smoothing * nv.array().sqrt().matrix() + (1.0 - b.smoothing) * sd;
  }
  return to_result(H, std::move(best->u), std::move(best->e));
}

struct StateKey {
  std::size_t operator()(const State& x) const {
    std::size_t h = 1469598103934665603ULL;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      std::uint64_t bits;
      const double v = x(i) == 0.0 ? 0.0 : x(i);
      std::memcpy(&bits, &v, sizeof bits);
      h = (h ^ bits) * 1099511628211ULL;
    }
    return h;
  }
};
struct StateEq {
  bool operator()(const State& a, const State& b) const { return a.size() == b.size() && (a.array() == b.array()).all(); }
};

}  // namespace

std::vector<PlanResult> solve_binary_all(const State& x, const SetList& list, int H_max, const Environment& env,
                                         const OptimizerBudget& budget) {
  if (H_max < 1 || H_max > list.size()) throw ContractError("solve_mpc: horizon must lie in [1, T]");
  const auto& is = env.input_space();
  const int m = is.dim();
  const int nu = 1 << m;
  struct Node {
    State x;
    double arrive;  // sum of stage costs over stages 1..j-1
    double cum;     // arrive + stage cost at this layer
    int parent;
    int code;       // input bits from the parent
  };
  std::vector<std::vector<Node>> layers(static_cast<size_t>(H_max + 1));
  layers[0].push_back({x, 0.0, 0.0, -1, 0});
  std::vector<PlanResult> out(static_cast<size_t>(H_max));
  Input u(m);
  for (int j = 1; j <= H_max; ++j) {
    std::unordered_map<State, int, StateKey, StateEq> index;
    auto& cur = layers[static_cast<size_t>(j)];
    const auto& prev = layers[static_cast<size_t>(j - 1)];
    for (int p = 0; p < static_cast<int>(prev.size()); ++p) {
      for (int code = 0; code < nu; ++code) {
        for (int i = 0; i < m; ++i) u(i) = (code >> i) & 1;
        const State nx = env.step(prev[static_cast<size_t>(p)].x, u);
        if (env.violation(nx) > 0.0) continue;
        double arrive = prev[static_cast<size_t>(p)].cum;
        if (budget.input_penalty) arrive += budget.input_penalty_weight * input_box_penalty(list, j - 1, u, env);
        auto it = index.find(nx);
        if (it == index.end()) {
          index.emplace(nx, static_cast<int>(cur.size()));
          cur.push_back({nx, arrive, 0.0, p, code});
        } else if (arrive < cur[static_cast<size_t>(it->second)].arrive) {
          auto& n = cur[static_cast<size_t>(it->second)];
          n.arrive = arrive;
          n.parent = p;
          n.code = code;
        }
      }
    }
    const auto& slot = list[j - 1];
    for (auto& n : cur) n.cum = n.arrive + (slot.is_empty() ? 0.0 : slot.distance(n.x));

    PlanResult& r = out[static_cast<size_t>(j - 1)];
    r.H = j;
    if (slot.is_empty()) continue;
    int best = -1;
    for (int i = 0; i < static_cast<int>(cur.size()); ++i) {
      const auto& n = cur[static_cast<size_t>(i)];
      if (n.cum != n.arrive) continue;  // terminal distance must be exactly 0
      if (best < 0 || n.arrive < cur[static_cast<size_t>(best)].arrive) best = i;
    }
    if (best < 0) {
      r.feasible = false;
      r.slack = std::numeric_limits<double>::infinity();
      continue;
    }
    r.feasible = true;
    r.objective = cur[static_cast<size_t>(best)].arrive;
    r.inputs.assign(static_cast<size_t>(j), Input(m));
    r.states.assign(static_cast<size_t>(j + 1), State());
    int idx = best;
    for (int l = j; l >= 1; --l) {
      const auto& n = layers[static_cast<size_t>(l)][static_cast<size_t>(idx)];
      r.states[static_cast<size_t>(l)] = n.x;
      for (int i = 0; i < m; ++i) r.inputs[static_cast<size_t>(l - 1)](i) = (n.code >> i) & 1;
      idx = n.parent;
    }
    r.states[0] = x;
  }
  return out;
}

PlanResult solve_mpc(const State& x, const SetList& list, int H, const Environment& env,
                     const OptimizerBudget& budget, std::uint64_t seed, const std::vector<std::vector<Input>>& warm,
                     const PadPolicy& pad) {
  if (H < 1 || H > list.size()) throw ContractError("solve_mpc: horizon must lie in [1, T]");
  if (list[H - 1].is_empty()) throw ContractError("solve_mpc: slot H-1 is empty");
  if (env.input_space().kind == InputKind::Binary) {
    auto all = solve_binary_all(x, list, H, env, budget);
    return all.back();
  }
  return solve_cem(x, list, H, env, budget, seed, warm, pad);
}

std::optional<int> select_horizon_scan(int T, const std::function<bool(int)>& nonempty,
                                       const std::function<bool(int)>& feasible) {
  for (int s = T; s >= 1; --s) {
    if (!nonempty(s - 1)) continue;
    if (feasible(s)) return s;
  }
  return std::nullopt;
}

HorizonChoice select_horizon(const State& x, const SetList& list, const Environment& env,
                             const OptimizerBudget& budget, std::uint64_t seed,
                             const std::vector<std::vector<Input>>& warm, const PadPolicy& pad) {
  HorizonChoice out;
  const int T = list.size();
  auto nonempty = [&](int j) { return !list[j].is_empty(); };
  if (env.input_space().kind == InputKind::Binary) {
    int hmax = 0;
    for (int j = 0; j < T; ++j)
      if (nonempty(j)) hmax = j + 1;
    if (hmax == 0) return out;
    auto all = solve_binary_all(x, list, hmax, env, budget);
    out.H = select_horizon_scan(hmax, nonempty, [&](int s) { return all[static_cast<size_t>(s - 1)].feasible; });
    if (out.H) out.plan = std::move(all[static_cast<size_t>(*out.H - 1)]);
    return out;
  }
  out.H = select_horizon_scan(T, nonempty, [&](int s) {
    out.plan = solve_cem(x, list, s, env, budget, substream_seed(seed, "horizon", static_cast<std::uint64_t>(s)),
                         warm, pad);
    return out.plan.feasible;
  });
  if (!out.H) out.plan = PlanResult{};
  return out;
}

namespace {

// Per-slot sequences read off the strategy input boxes (lower edge, center or
// upper edge, chosen per input dimension) up to the last slot with a box; slots without one borrow the
// next box ahead. Only meaningful when the strategy input is the raw input.
std::vector<std::vector<Input>> box_sequences(const SetList& list, const Environment& env) {
  std::vector<std::vector<Input>> out;
  const int m = env.input_space().dim();
  if (env.strategy_input_dim() != m) return out;
  auto has_box = [&](int j) { return !list[j].is_empty() && list[j].input_lo().size() == m; };
  int last = list.size() - 1;
  while (last >= 0 && !has_box(last)) --last;
  if (last < 0) return out;
  int combos = 1;
  for (int i = 0; i < m; ++i) combos *= 3;
  for (int c = 0; c < combos; ++c) {
    Vec w(m);
    for (int i = 0, r = c; i < m; ++i, r /= 3) w(i) = 0.5 * (r % 3);
    std::vector<Input> seq(static_cast<size_t>(last + 1));
    Input u;
    for (int j = last; j >= 0; --j) {
      if (has_box(j)) u = list[j].input_lo().array() + w.array() * (list[j].input_hi() - list[j].input_lo()).array();
      seq[static_cast<size_t>(j)] = u;
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace

std::vector<Input> safety_rollout(const Environment& env, const SafetyPolicy& sp, const State& x, int H) {
  std::vector<Input> u;
  State s = x;
  for (int j = 0; j < H; ++j) {
    u.push_back(sp.input(env, s));
    s = env.step(s, u.back());
  }
  return u;
}

nlohmann::json StepLog::to_json() const {
  return {{"k", k},
          {"mode", mode == Mode::MPC ? "mpc" : "safety"},
          {"H", H},
          {"C", std::vector<double>(C.data(), C.data() + C.size())},
          {"accepted", accepted},
          {"target", target},
          {"u", std::vector<double>(u.data(), u.data() + u.size())},
          {"objective", objective},
          {"wall_ms", wall_ms}};
}

nlohmann::json RunStats::to_json() const {
  return {{"steps", steps},           {"safety_steps", safety_steps},
          {"mpc_steps", mpc_steps},   {"gate_rejections", gate_rejections},
          {"violations", violations}, {"unsafe_safety_entries", unsafe_safety_entries},
          {"wall_s", wall_s}};
}

HplController::HplController(const Strategy& strategy, SafeSetPtr ss, SafetyPolicyPtr sp, HplConfig cfg,
                             std::uint64_t seed)
    : strategy_(strategy), ss_(std::move(ss)), sp_(std::move(sp)), cfg_(cfg), seed_(seed), list_(cfg.T) {
  if (cfg_.T != strategy_.T() || cfg_.N != strategy_.N())
    throw ConfigError("HPL horizons N/T must match the trained strategy");
  if (cfg_.beta < 0.0 || cfg_.beta > 1.0) throw ConfigError("beta must lie in [0, 1]");
  if (!(cfg_.d_thresh > 0.0)) throw ConfigError("d_thresh must be > 0");
}

Input HplController::step(const Environment& env, const State& x, StepLog* log) {
  const auto t0 = std::chrono::steady_clock::now();
  const EnvPtr view = env.view_at(x);
  const Mat F = view->forecast(x, cfg_.N);
  const StrategySet set = strategy_.evaluate(view->query_state(x), F, cfg_.eta);
  const bool accept = confidence_gate(set.confidence, cfg_.d_thresh);
  list_.push(accept ? lift(set, ss_, view, x, cfg_.beta, k_, k_ + cfg_.T) : TargetSet::empty(k_, k_ + cfg_.T));

  Input u;
  int H = 0;
  double obj = 0.0;
  const Mode before = mode_;
  std::optional<int> chosen;
  if (!list_.all_empty()) {
    std::vector<std::vector<Input>> warm;
    if (prev_plan_.size() > 1) warm.emplace_back(prev_plan_.begin() + 1, prev_plan_.end());
    warm.emplace_back();
    for (auto& seq : box_sequences(list_, *view)) warm.push_back(std::move(seq));
    const SafetyPolicy& sp = *sp_;
    PadPolicy pad = [&](const State& s) { return sp.input(*view, s); };
    auto choice = select_horizon(x, list_, *view, cfg_.budget,
                                 substream_seed(seed_, "optimizer", static_cast<std::uint64_t>(k_)), warm, pad);
    chosen = choice.H;
    if (chosen) {
      H = *chosen;
      u = choice.plan.inputs.front();
      obj = choice.plan.objective;
      prev_plan_ = std::move(choice.plan.inputs);
    }
  }
  if (!chosen) {
    mode_ = Mode::SafetyControl;
    u = sp_->input(env, x);
    prev_plan_.clear();
  } else {
    mode_ = Mode::MPC;
  }
  if (log) {
    log->k = k_;
    log->mode = mode_;
    log->H = H;
    log->C = set.confidence;
    log->accepted = accept;
    log->target = list_[list_.size() - 1].to_json();
    log->u = u;
    log->objective = obj;
    log->in_safe_set = !(mode_ == Mode::SafetyControl && before == Mode::MPC) || ss_->contains(env, x);
    log->wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  ++k_;
  return u;
}

RunResult run_task(const EnvPtr& env, const Strategy& strategy, SafeSetPtr ss, SafetyPolicyPtr sp,
                   const HplConfig& cfg, std::uint64_t seed, bool keep_logs) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult r;
  r.execution.env_id = env->id();
  r.execution.family = env->family();
  r.execution.dt = env->dt();
  HplController ctl(strategy, ss, sp, cfg, seed);
  State x = env->initial_state();
  r.execution.states.push_back(x);
  while (!env->task_done(x) && r.stats.steps < cfg.step_cap) {
    StepLog log;
    const Input u = ctl.step(*env, x, &log);
    if (log.mode == Mode::SafetyControl) ++r.stats.safety_steps;
    else ++r.stats.mpc_steps;
    if (!log.accepted) ++r.stats.gate_rejections;
    if (!log.in_safe_set) ++r.stats.unsafe_safety_entries;
    if (keep_logs) r.logs.push_back(log);
    ++r.stats.steps;
    if (!env->input_space().contains(u)) {
      ++r.stats.violations;
      r.execution.feasible = false;
      break;
    }
    x = env->step(x, u);
    r.execution.inputs.push_back(u);
    r.execution.states.push_back(x);
    if (!env->constraints_ok(x)) {
      ++r.stats.violations;
      r.execution.feasible = false;
      break;
    }
  }
  r.execution.complete = env->task_done(x) && r.execution.feasible;
  r.execution.score = env->score(x);
  r.stats.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

RunResult run_policy(const EnvPtr& env, const FeedbackPolicy& policy, int step_cap) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult r;
  r.execution.env_id = env->id();
  r.execution.family = env->family();
  r.execution.dt = env->dt();
  State x = env->initial_state();
  r.execution.states.push_back(x);
  while (!env->task_done(x) && r.stats.steps < step_cap) {
    const Input u = policy(*env, x);
    ++r.stats.steps;
    ++r.stats.safety_steps;
    if (!env->input_space().contains(u)) {
      ++r.stats.violations;
      r.execution.feasible = false;
      break;
    }
    x = env->step(x, u);
    r.execution.inputs.push_back(u);
    r.execution.states.push_back(x);
    if (!env->constraints_ok(x)) {
      ++r.stats.violations;
      r.execution.feasible = false;
      break;
    }
  }
  r.execution.complete = env->task_done(x) && r.execution.feasible;
  r.execution.score = env->score(x);
  r.stats.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace hpl
