#pragma once

#include <vector>

#include "hpl/environment.hpp"
#include "hpl/rng.hpp"
#include "hpl/safety.hpp"

namespace hpl {

struct TubeSegment {
  double slope = 0.0;
  double length = 1.0;  // horizontal extent
};

struct TubeParams {
  double width = 0.4;
  double dt = 0.1;
  double a_max = 5.0;
  double v_max = 2.5;     // |q_dot|, |y_dot|
  double spacing = 0.5;   // forecast arc-length spacing
  double fillet = 0.15;   // half-width of the corner blend of the smoothed centerline
};

// Double integrator [q, q_dot, y, y_dot] moving through a piecewise-linear
// tube; walls bound the vertical offset from the centerline.
class TubeEnv : public Environment, public std::enable_shared_from_this<TubeEnv> {
 public:
  TubeEnv(std::vector<TubeSegment> segs, std::string id, TubeParams p = {});

  std::string family() const override { return "tube"; }
  std::string id() const override { return id_; }
  int state_dim() const override { return 4; }
  const InputSpace& input_space() const override { return input_space_; }
  double dt() const override { return p_.dt; }
  State initial_state() const override;
  State step(const State& x, const Input& u) const override;
  double violation(const State& x) const override;
  int theta_dim() const override { return 1; }
  Vec theta(const State& x) const override;
  Mat forecast(const State& x, int N) const override;
  bool task_done(const State& x) const override { return x(0) >= q_end_; }
  int strategy_dim() const override { return 2; }
  Vec strategy_state(const State& x, const State& anchor) const override;
  Vec query_state(const State& x) const override;
  std::shared_ptr<const Environment> view_at(const State&) const override { return shared_from_this(); }
  nlohmann::json describe() const override;

  const TubeParams& params() const { return p_; }
  const std::vector<TubeSegment>& segments() const { return segs_; }
  double q_end() const { return q_end_; }

  // Polyline centerline, slope and arc length, all as functions of q.
  double center(double q) const;
  double slope(double q) const;
  double arc(double q) const;
  double q_at_arc(double s) const;
  // Smoothed centerline (parabolic blends of half-width `fillet` at corners).
  double center_s(double q) const;
  double slope_s(double q) const;
  double curv_s(double q) const;  // second derivative
  // Vertex positions and slope jumps.
  const std::vector<double>& vertices() const { return qv_; }

 private:
  int seg_index(double q) const;

  std::vector<TubeSegment> segs_;
  std::string id_;
  TubeParams p_;
  InputSpace input_space_;
  std::vector<double> qv_;   // segment start q (size n+1, last = q_end)
  std::vector<double> cv_;   // centerline height at segment starts
  std::vector<double> sv_;   // arc length at segment starts
  double q_end_ = 0.0;
};

using TubePtr = std::shared_ptr<const TubeEnv>;

struct TubeGenSpec {
  int min_segments = 8, max_segments = 15;
  double min_slope = -1.0, max_slope = 1.0;
  double min_length = 1.0, max_length = 3.0;
};
TubePtr make_tube(std::uint64_t seed, int index, const TubeGenSpec& spec = {}, TubeParams p = {});
// Curated sharp-curve tubes: long straights ending in slope reversals,
// driven with half the input authority so that braking for a corner can take
// longer than the tube planning horizon (0.5 s).
TubeParams sharp_tube_params();
TubePtr make_sharp_tube(std::uint64_t seed, int index, TubeParams p = sharp_tube_params());
TubePtr tube_from_json(const nlohmann::json& j);

// Safety behavior: track the smoothed centerline at a path speed of 0.5 m/s.
struct TubeSafetyParams {
  double v_path = 0.5;
  double tau = 0.3;      // p = e + tau * e_dot
  double lambda = 2.0;   // contraction rate of p
  double aq_max = 1.5;   // longitudinal authority used by the policy
  // Safe-set description
  double p_max = 0.075;
  double e_max = 0.12;
  double edot_max = 0.5;
  double ydot_max = 2.45;
  double corner_acc = 1.2;  // lateral acceleration budget in corners
  double brake = 1.2;       // deceleration assumed by the speed envelope
  double q_dot_cap = 2.4;
};

// Speed envelope: largest q_dot from which braking at `brake` meets every
// corner and slope-dependent cap ahead.
double tube_speed_envelope(const TubeEnv& env, double q, double corner_acc, double brake,
                           double cap, double ydot_cap);

class TubeSafetyPolicy : public SafetyPolicy {
 public:
  explicit TubeSafetyPolicy(TubeSafetyParams p = {}) : p_(p) {}
  Input input(const Environment& env, const State& x) const override;
  // Shared tracking law: deadbeat on q_dot towards q_dot_ref, exact
  // contraction of p through a_y.
  static Input track(const TubeEnv& env, const State& x, double q_dot_ref, double aq_max,
                     double tau, double lambda);
  const TubeSafetyParams& params() const { return p_; }

 private:
  TubeSafetyParams p_;
};

class TubeSafeSet : public BoxSafeSet {
 public:
  explicit TubeSafeSet(TubeSafetyParams p = {}, double alpha = 1.0) : p_(p), alpha_(alpha) {}
  Bounds bounds(const Environment& env, const State& x) const override;
  std::optional<State> propose(const Environment& env, Rng& rng) const override;
  std::shared_ptr<SafeSet> scaled(double alpha) const override;
  nlohmann::json params() const override;
  const TubeSafetyParams& safety_params() const { return p_; }

 private:
  TubeSafetyParams p_;
  double alpha_;
};

}  // namespace hpl
