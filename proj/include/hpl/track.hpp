#pragma once

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "hpl/environment.hpp"
#include "hpl/rng.hpp"
#include "hpl/safety.hpp"

namespace hpl {

struct TrackParams {
  double dt = 0.1;
  double wheelbase = 0.26;
  double lane_width = 0.8;
  double v_max = 10.0;
  double epsi_max = 1.0471975511965976;  // pi/3
  double a_max = 1.0;
  double steer_max = 0.5;
  double lat_acc_max = 6.0;  // yaw-rate saturation |psi_dot| * v <= lat_acc_max
  double spacing = 2.0;      // forecast spacing along the centerline
  double start_speed = 5.0;
};

// Kinematic bicycle in curvilinear coordinates, state [v, e_psi, s, e_y],
// input [a, delta]. Curvature is periodic in s with period length().
class TrackEnv : public Environment, public std::enable_shared_from_this<TrackEnv> {
 public:
  // kappa sampled every ds metres, first sample at s = 0.
  TrackEnv(std::vector<double> kappa, double ds, std::string id, TrackParams p = {});

  std::string family() const override { return "track"; }
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
  bool task_done(const State& x) const override { return x(2) >= length(); }
  int strategy_dim() const override { return 2; }
  Vec strategy_state(const State& x, const State& anchor) const override;
  Vec query_state(const State& x) const override;
  std::shared_ptr<const Environment> view_at(const State&) const override { return shared_from_this(); }
  nlohmann::json describe() const override;

  const TrackParams& params() const { return p_; }
  double length() const { return ds_ * static_cast<double>(kappa_.size()); }
  double ds() const { return ds_; }
  const std::vector<double>& samples() const { return kappa_; }
  double kappa(double s) const;

  // Braking envelope: the largest speed at s from which decelerating at
  // `brake` keeps |kappa| v^2 <= lat_acc everywhere ahead; capped at `cap`.
  double envelope(double s, double lat_acc, double brake, double cap) const;

 private:
  const std::vector<double>& envelope_table(double lat_acc, double brake, double cap) const;

  std::vector<double> kappa_;
  double ds_;
  std::string id_;
  TrackParams p_;
  InputSpace input_space_;
  mutable std::mutex mu_;
  mutable std::map<std::tuple<double, double, double>, std::vector<double>> env_cache_;
};

using TrackPtr = std::shared_ptr<const TrackEnv>;

struct TrackGenSpec {
  int pieces = 8;  // arc/straight pairs
  double min_straight = 10.0, max_straight = 40.0;
  double min_kappa = 0.04, max_kappa = 0.18;
  double min_arc = 5.0, max_arc = 25.0;
  double transition = 3.0;
  double ds = 0.25;
};
TrackPtr make_track(std::uint64_t seed, int index, const TrackGenSpec& spec = {}, TrackParams p = {});
// Layout CSV with header "s,kappa".
TrackPtr load_track_csv(const std::string& path, const std::string& id, TrackParams p = {});
void save_track_csv(const TrackEnv& env, const std::string& path);

struct TrackSafetyParams {
  double v_ref = 5.0;
  double tau = 0.35;
  double lambda = 1.5;
  double p_max = 0.22;
  double ey_max = 0.3;
  double lat_rate_max = 0.53;  // |v sin e_psi|
  double epsi_max = 0.5;
  double v_min = 1.0;
  double corner_acc = 5.0;
  double brake = 0.8;
  double v_cap = 9.9;
};

class TrackSafetyPolicy : public SafetyPolicy {
 public:
  explicit TrackSafetyPolicy(TrackSafetyParams p = {}) : p_(p) {}
  Input input(const Environment& env, const State& x) const override;
  // Deadbeat speed tracking plus exact contraction of
  // p = (e_y - ey_ref) + tau v sin e_psi.
  static Input track(const TrackEnv& env, const State& x, double v_ref, double tau, double lambda,
                     double ey_ref = 0.0);

 private:
  TrackSafetyParams p_;
};

class TrackSafeSet : public BoxSafeSet {
 public:
  explicit TrackSafeSet(TrackSafetyParams p = {}, double alpha = 1.0) : p_(p), alpha_(alpha) {}
  Bounds bounds(const Environment& env, const State& x) const override;
  std::optional<State> propose(const Environment& env, Rng& rng) const override;
  std::shared_ptr<SafeSet> scaled(double alpha) const override;
  nlohmann::json params() const override;

 private:
  TrackSafetyParams p_;
  double alpha_;
};

}  // namespace hpl
