#include "hpl/demonstrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "hpl/errors.hpp"

namespace hpl {

namespace {

template <class Ctl>
Execution rollout(const Environment& env, Ctl&& ctl, int cap) {
  Execution ex;
  ex.env_id = env.id();
  ex.family = env.family();
  ex.dt = env.dt();
  State x = env.initial_state();
  ex.states.push_back(x);
  while (!env.task_done(x) && ex.duration_steps() < cap) {
    const Input u = ctl(x);
    if (!env.input_space().contains(u)) {
      ex.feasible = false;
      break;
    }
    x = env.step(x, u);
    ex.inputs.push_back(u);
    ex.states.push_back(x);
    if (!env.constraints_ok(x)) {
      ex.feasible = false;
      break;
    }
  }
  ex.complete = ex.feasible && env.task_done(x);
  ex.score = env.score(x);
  return ex;
}

const double kLevels[] = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4};

}  // namespace

DemoResult demonstrate_tube(const TubeEnv& env, const DemoConfig& cfg) {
  DemoResult r;
  for (double lvl : kLevels) {
    const double corner = 3.5 * lvl, brake = 2.5 * lvl;
    auto ctl = [&](const State& x) {
      // Reference for the next position so braking starts on time.
      const double q1 = x(0) + x(1) * env.dt();
      const double v = tube_speed_envelope(env, q1, corner, brake, 2.4, 2.0);
      return TubeSafetyPolicy::track(env, x, v, 3.0, 0.3, 2.0);
    };
    Execution ex = rollout(env, ctl, cfg.step_cap);
    if (ex.complete) {
      r.execution = std::move(ex);
      r.level = lvl;
      return r;
    }
  }
  r.diagnostic = "tube demonstrator: no aggressiveness level completed " + env.id();
  return r;
}

namespace {

// Lateral reference that leans toward the inside of the curvature ahead.
double racing_offset(const TrackEnv& env, double s) {
  double k = 0.0;
  for (int i = 0; i < 10; ++i) k += env.kappa(s + 1.5 * i);
  return 0.2 * std::tanh(k / 10.0 / 0.05);
}

}  // namespace

DemoResult demonstrate_track(const TrackEnv& env, const DemoConfig& cfg) {
  DemoResult r;
  for (double lvl : kLevels) {
    const double lat = 5.8 * lvl;
    auto ctl = [&](const State& x) {
      const double s1 = x(2) + x(0) * env.dt();
      const double v = env.envelope(s1, lat, 0.9, 9.9);
      return TrackSafetyPolicy::track(env, x, v, 0.35, 1.5, racing_offset(env, x(2)));
    };
    Execution ex = rollout(env, ctl, cfg.step_cap);
    if (ex.complete) {
      r.execution = std::move(ex);
      r.level = lvl;
      return r;
    }
  }
  r.diagnostic = "track demonstrator: no aggressiveness level completed " + env.id();
  return r;
}

Input flappy_tracking_input(const FlappyEnv& constraints, const State& x, int horizon,
                            const std::function<double(double)>& ref, int beam) {
  struct Node {
    int y, v;
    double cost;
    int first;  // first input of the path
  };
  std::vector<Node> layer{{static_cast<int>(x(1)), static_cast<int>(x(2)), 0.0, -1}};
  std::vector<Node> deepest = layer;
  State s(3);
  for (int j = 1; j <= horizon && !layer.empty(); ++j) {
    const double xj = x(0) + 4.0 * j;
    const double r = ref(xj);
    std::unordered_map<long long, int> index;
    std::vector<Node> next;
    for (const auto& n : layer) {
      for (int u = 0; u <= 1; ++u) {
        const int y = n.y + n.v, v = n.v - 1 + 16 * u;
        s << xj, y, v;
        if (constraints.violation(s) > 0.0) continue;
        const double c = n.cost + (y - r) * (y - r);
        const int first = j == 1 ? u : n.first;
        const long long key = (static_cast<long long>(y) << 20) ^ (v + 4096);
        auto it = index.find(key);
        if (it == index.end()) {
          index.emplace(key, static_cast<int>(next.size()));
          next.push_back({y, v, c, first});
        } else {
          auto& m = next[static_cast<size_t>(it->second)];
          if (c < m.cost || (c == m.cost && first < m.first)) {
            m.cost = c;
            m.first = first;
          }
        }
      }
    }
    if (beam > 0 && static_cast<int>(next.size()) > beam) {
      std::stable_sort(next.begin(), next.end(), [](const Node& a, const Node& b) { return a.cost < b.cost; });
      next.resize(static_cast<size_t>(beam));
    }
    layer = std::move(next);
    if (!layer.empty()) deepest = layer;
  }
  const auto best = std::min_element(deepest.begin(), deepest.end(), [](const Node& a, const Node& b) {
    return a.cost < b.cost || (a.cost == b.cost && a.first < b.first);
  });
  Input u(1);
  u(0) = best->first < 0 ? 0.0 : best->first;
  return u;
}

Input flappy_baseline_input(const FlappyEnv& env, const State& x, const FlappyBaselineParams& bp) {
  const int n = bp.horizon;
  if (n < 2) throw ContractError("baseline horizon must be >= 2");
  const auto view = std::static_pointer_cast<const FlappyEnv>(env.view_at(x));
  const auto& p = view->params();
  const int cur = view->next_pipe(x(0));
  const double fallback = cur < view->known() ? view->gap_center(cur) : p.fill;
  // y_j = y_free + Gy u, v_j = v_free + Gv u for j = 1..n
  Mat Gy = Mat::Zero(n, n), Gv = Mat::Zero(n, n);
  Vec y_free(n), v_free(n), ref(n), lo(n), hi(n);
  for (int j = 1; j <= n; ++j) {
    y_free(j - 1) = x(1) + j * x(2) - 0.5 * j * (j - 1);
    v_free(j - 1) = x(2) - j;
    for (int i = 0; i < j; ++i) {
      Gv(j - 1, i) = 16.0;
      if (i + 1 < j) Gy(j - 1, i) = 16.0 * (j - 1 - i);
    }
    const double xj = x(0) + 4.0 * j;
    const int i = view->next_pipe(xj);
    ref(j - 1) = i < view->known() ? view->gap_center(i) : fallback;
    lo(j - 1) = 0.0;
    hi(j - 1) = p.height;
    const int c = static_cast<int>(std::floor((xj - p.first_pipe) / p.spacing));
    if (c >= 0 && c < view->known() && xj >= view->pipe_x(c) && xj <= view->pipe_x(c) + p.pipe_width) {
      lo(j - 1) = view->gap_low(c);
      hi(j - 1) = view->gap_low(c) + p.gap;
    }
  }
  // min |y - ref|^2 + w |v|^2  s.t.  0 <= u <= 1, lo <= y <= hi  (ADMM)
  Mat A(2 * n, n);
  A << Mat::Identity(n, n), Gy;
  Vec l(2 * n), h(2 * n);
  l << Vec::Zero(n), lo - y_free;
  h << Vec::Ones(n), hi - y_free;
  const double w = bp.velocity_weight;
  const Mat P = 2.0 * (Gy.transpose() * Gy + w * Gv.transpose() * Gv);
  const Vec q = 2.0 * (Gy.transpose() * (y_free - ref) + w * Gv.transpose() * v_free);
  const double rho = 1.0, sigma = 1e-6;
  const Eigen::LDLT<Mat> K(P + sigma * Mat::Identity(n, n) + rho * A.transpose() * A);
  Vec u = Vec::Constant(n, 0.5), z = (A * u).cwiseMax(l).cwiseMin(h), lam = Vec::Zero(2 * n);
  for (int it = 0; it < bp.iterations; ++it) {
    u = K.solve(sigma * u - q + A.transpose() * (rho * z - lam));
    const Vec Au = A * u;
    z = (Au + lam / rho).cwiseMax(l).cwiseMin(h);
    lam += rho * (Au - z);
  }
  Input out(1);
  out(0) = u(0) >= bp.flap_threshold ? 1.0 : 0.0;
  return out;
}

DemoResult demonstrate_flappy(const FlappyEnv& env, const DemoConfig& cfg) {
  DemoResult r;
  const auto& p = env.params();
  // Interpolated centerline: flat across each pipe, linear between pipes.
  auto ref = [&](double xj) {
    const int i = env.next_pipe(xj);
    const double c1 = env.gap_center(i);
    const int px = env.pipe_x(i);
    if (xj >= px || i == 0) return c1;
    const double c0 = env.gap_center(i - 1);
    const double x0 = env.pipe_x(i - 1) + p.pipe_width;
    return c0 + (c1 - c0) * (xj - x0) / (px - x0);
  };
  auto ctl = [&](const State& x) { return flappy_tracking_input(env, x, cfg.flappy_horizon, ref, cfg.flappy_beam); };
  Execution ex = rollout(env, ctl, cfg.step_cap);
  if (ex.complete) {
    r.execution = std::move(ex);
    r.level = 1.0;
  } else {
    r.diagnostic = "flappy demonstrator crashed on " + env.id() + " after " + std::to_string(ex.score) + " pipes";
  }
  return r;
}

DemoResult demonstrate(const EnvPtr& env, std::uint64_t seed, const DemoConfig& cfg) {
  (void)seed;  // demonstrators are deterministic
  if (auto t = std::dynamic_pointer_cast<const TubeEnv>(env)) return demonstrate_tube(*t, cfg);
  if (auto t = std::dynamic_pointer_cast<const TrackEnv>(env)) return demonstrate_track(*t, cfg);
  if (auto f = std::dynamic_pointer_cast<const FlappyEnv>(env)) return demonstrate_flappy(*f, cfg);
  throw ContractError("demonstrate: unknown environment family " + env->family());
}

}  // namespace hpl
