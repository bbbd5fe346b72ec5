#pragma once

#include <functional>
#include <optional>
#include <string>

#include "hpl/environment.hpp"
#include "hpl/flappy.hpp"
#include "hpl/planner.hpp"
#include "hpl/track.hpp"
#include "hpl/tube.hpp"

namespace hpl {

struct DemoResult {
  std::optional<Execution> execution;  // nullopt: instance skipped
  std::string diagnostic;
  double level = 0.0;  // aggressiveness level that produced the execution
};

// Full-knowledge near-minimum-time executions. Tube and track: tracking of a
// braking-envelope speed profile, most aggressive level whose complete run is
// feasible. Flappy: receding exact search over `horizon` steps tracking the
// interpolated gap centerline with all pipes known.
struct DemoConfig {
  int step_cap = 20000;
  int flappy_horizon = 40;
  int flappy_beam = 400;
};

DemoResult demonstrate(const EnvPtr& env, std::uint64_t seed, const DemoConfig& cfg = {});
DemoResult demonstrate_tube(const TubeEnv& env, const DemoConfig& cfg);
DemoResult demonstrate_track(const TrackEnv& env, const DemoConfig& cfg);
DemoResult demonstrate_flappy(const FlappyEnv& env, const DemoConfig& cfg);

// Receding binary search tracking a reference height over `horizon` steps
// with hard constraints from `constraints`; falls back to the plan that
// survives longest. beam <= 0 keeps every distinct state.
Input flappy_tracking_input(const FlappyEnv& constraints, const State& x, int horizon,
                            const std::function<double(double)>& ref, int beam);

struct FlappyBaselineParams {
  int horizon = 30;
  double velocity_weight = 20.0;
  double flap_threshold = 0.7;  // round the relaxed first flap
  int iterations = 400;
};

// Center-tracking MPC baseline. Flaps are relaxed to u in [0, 1]; the
// quadratic problem tracks the center of the next unpassed visible pipe at
// each predicted position with a velocity penalty, visible pipe walls and
// the screen as hard bounds on y. The first relaxed input is rounded. It
// plans nothing beyond its horizon and knows nothing of the flap's size.
Input flappy_baseline_input(const FlappyEnv& env, const State& x, const FlappyBaselineParams& bp = {});

}  // namespace hpl
