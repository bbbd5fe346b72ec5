#include "hpl/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "hpl/errors.hpp"

namespace hpl {

TrackEnv::TrackEnv(std::vector<double> kappa, double ds, std::string id, TrackParams p)
    : kappa_(std::move(kappa)), ds_(ds), id_(std::move(id)), p_(p) {
  if (kappa_.size() < 2 || !(ds_ > 0.0)) throw ContractError("track: need >= 2 samples and ds > 0");
  input_space_.kind = InputKind::Box;
  input_space_.lo.resize(2);
  input_space_.hi.resize(2);
  input_space_.lo << -p_.a_max, -p_.steer_max;
  input_space_.hi << p_.a_max, p_.steer_max;
}

double TrackEnv::kappa(double s) const {
  const double L = length();
  double u = std::fmod(s, L);
  if (u < 0) u += L;
  const double f = u / ds_;
  const auto i = static_cast<size_t>(f);
  const double t = f - static_cast<double>(i);
  const size_t n = kappa_.size();
  return (1.0 - t) * kappa_[i % n] + t * kappa_[(i + 1) % n];
}

State TrackEnv::initial_state() const {
  State x(4);
  x << p_.start_speed, 0.0, 0.0, 0.0;
  return x;
}

State TrackEnv::step(const State& x, const Input& u) const {
  const double v = x(0), epsi = x(1), s = x(2), ey = x(3);
  const double k = kappa(s);
  double yaw = v * std::tan(u(1)) / p_.wheelbase;
  if (v > 1e-9) {
    const double lim = p_.lat_acc_max / v;
    yaw = std::clamp(yaw, -lim, lim);
  }
  const double sdot = v * std::cos(epsi) / (1.0 - k * ey);
  State n(4);
  n(0) = v + u(0) * p_.dt;
  n(1) = epsi + (yaw - k * sdot) * p_.dt;
  n(2) = s + sdot * p_.dt;
  n(3) = ey + v * std::sin(epsi) * p_.dt;
  return n;
}

double TrackEnv::violation(const State& x) const {
  double v = std::max(0.0, -x(0)) + std::max(0.0, x(0) - p_.v_max);
  v += std::max(0.0, std::abs(x(1)) - p_.epsi_max);
  v += std::max(0.0, std::abs(x(3)) - 0.5 * p_.lane_width);
  return v;
}

Vec TrackEnv::theta(const State& x) const { return Vec::Constant(1, kappa(x(2))); }

Mat TrackEnv::forecast(const State& x, int N) const {
  Mat f(N + 1, 1);
  for (int j = 0; j <= N; ++j) f(j, 0) = kappa(x(2) + j * p_.spacing);
  return f;
}

Vec TrackEnv::strategy_state(const State& x, const State& anchor) const {
  Vec g(2);
  g << x(2) - anchor(2), x(3);
  return g;
}

Vec TrackEnv::query_state(const State& x) const {
  Vec z(4);
  z << x(0), x(1), 0.0, x(3);
  return z;
}

nlohmann::json TrackEnv::describe() const {
  return {{"family", "track"}, {"id", id_}, {"length", length()}, {"ds", ds_},
          {"dt", p_.dt}, {"spacing", p_.spacing}};
}

const std::vector<double>& TrackEnv::envelope_table(double lat_acc, double brake, double cap) const {
  std::lock_guard<std::mutex> lock(mu_);
  const auto key = std::make_tuple(lat_acc, brake, cap);
  auto it = env_cache_.find(key);
  if (it != env_cache_.end()) return it->second;
  const size_t n = kappa_.size();
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) {
    const double k = std::abs(kappa_[i]);
    v[i] = k > 1e-12 ? std::min(cap, std::sqrt(lat_acc / k)) : cap;
  }
  // Two backward sweeps settle the periodic wrap-around.
  for (int sweep = 0; sweep < 2; ++sweep) {
    for (size_t r = 0; r < n; ++r) {
      const size_t i = n - 1 - r;
      const double next = v[(i + 1) % n];
      v[i] = std::min(v[i], std::sqrt(next * next + 2.0 * brake * ds_));
    }
  }
  return env_cache_.emplace(key, std::move(v)).first->second;
}

double TrackEnv::envelope(double s, double lat_acc, double brake, double cap) const {
  const auto& t = envelope_table(lat_acc, brake, cap);
  const double L = length();
  double u = std::fmod(s, L);
  if (u < 0) u += L;
  const auto i = static_cast<size_t>(u / ds_);
  const size_t n = t.size();
  return std::min(t[i % n], t[(i + 1) % n]);
}

TrackPtr make_track(std::uint64_t seed, int index, const TrackGenSpec& spec, TrackParams p) {
  Rng rng = substream(seed, "track", static_cast<std::uint64_t>(index));
  // Piecewise-linear curvature profile: straight, ramp, arc, ramp, ...
  std::vector<std::pair<double, double>> knots;  // (s, kappa)
  double s = 0.0;
  double sign = 1.0;
  knots.emplace_back(0.0, 0.0);
  for (int i = 0; i < spec.pieces; ++i) {
    s += uniform(rng, spec.min_straight, spec.max_straight);
    knots.emplace_back(s, 0.0);
    if (uniform(rng, 0.0, 1.0) < 0.3) sign = -sign;
    const double k = sign * uniform(rng, spec.min_kappa, spec.max_kappa);
    s += spec.transition;
    knots.emplace_back(s, k);
    s += uniform(rng, spec.min_arc, spec.max_arc);
    knots.emplace_back(s, k);
    s += spec.transition;
    knots.emplace_back(s, 0.0);
  }
  s += uniform(rng, spec.min_straight, spec.max_straight);
  knots.emplace_back(s, 0.0);
  const auto n = static_cast<size_t>(std::floor(s / spec.ds));
  std::vector<double> kap(n);
  size_t j = 0;
  for (size_t i = 0; i < n; ++i) {
    const double si = static_cast<double>(i) * spec.ds;
    while (j + 1 < knots.size() && knots[j + 1].first < si) ++j;
    const auto [s0, k0] = knots[j];
    const auto [s1, k1] = knots[std::min(j + 1, knots.size() - 1)];
    kap[i] = s1 > s0 ? k0 + (k1 - k0) * (si - s0) / (s1 - s0) : k0;
  }
  return std::make_shared<TrackEnv>(std::move(kap), spec.ds,
                                    "track-" + std::to_string(seed) + "-" + std::to_string(index), p);
}

TrackPtr load_track_csv(const std::string& path, const std::string& id, TrackParams p) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot read track layout " + path);
  std::string line;
  std::getline(is, line);
  std::vector<double> s, k;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = line.find(',');
    if (c == std::string::npos) throw ParseError(path + ": expected s,kappa");
    try {
      s.push_back(std::stod(line.substr(0, c)));
      k.push_back(std::stod(line.substr(c + 1)));
    } catch (const std::exception&) {
      throw ParseError(path + ": bad number");
    }
  }
  if (s.size() < 2) throw ParseError(path + ": too few samples");
  const double ds = s[1] - s[0];
  for (size_t i = 1; i < s.size(); ++i) {
    if (std::abs(s[i] - s[i - 1] - ds) > 1e-9) throw ParseError(path + ": samples must be evenly spaced");
  }
  if (std::abs(s[0]) > 1e-12) throw ParseError(path + ": first sample must be at s = 0");
  return std::make_shared<TrackEnv>(std::move(k), ds, id, p);
}

void save_track_csv(const TrackEnv& env, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "s,kappa\n" << std::setprecision(17);
  for (size_t i = 0; i < env.samples().size(); ++i)
    os << static_cast<double>(i) * env.ds() << "," << env.samples()[i] << "\n";
}

Input TrackSafetyPolicy::track(const TrackEnv& env, const State& x, double v_ref, double tau,
                               double lambda, double ey_ref) {
  const auto& tp = env.params();
  const double h = tp.dt;
  const double v = x(0), epsi = x(1), s = x(2), ey = x(3);
  Input u(2);
  u(0) = std::clamp((v_ref - v) / h, -tp.a_max, tp.a_max);
  const double v1 = v + u(0) * h;
  const double ey1 = ey - ey_ref + v * std::sin(epsi) * h;
  const double p = ey - ey_ref + tau * v * std::sin(epsi);
  double sin1 = v1 > 1e-6 ? ((1.0 - lambda * h) * p - ey1) / (tau * v1) : 0.0;
  sin1 = std::clamp(sin1, -0.8, 0.8);
  const double epsi1 = std::asin(sin1);
  const double k = env.kappa(s);
  const double sdot = v * std::cos(epsi) / (1.0 - k * ey);
  const double yaw = (epsi1 - epsi) / h + k * sdot;
  u(1) = v > 1e-6 ? std::clamp(std::atan(yaw * tp.wheelbase / v), -tp.steer_max, tp.steer_max) : 0.0;
  return u;
}

Input TrackSafetyPolicy::input(const Environment& env, const State& x) const {
  return track(dynamic_cast<const TrackEnv&>(env), x, p_.v_ref, p_.tau, p_.lambda);
}

BoxSafeSet::Bounds TrackSafeSet::bounds(const Environment& env, const State& x) const {
  const auto& tr = dynamic_cast<const TrackEnv&>(env);
  const auto& tp = tr.params();
  const double a = alpha_;
  const double lat = x(0) * std::sin(x(1));
  Bounds b;
  b.coord.resize(5);
  b.coord << x(3) + p_.tau * lat, x(3), lat, x(0), x(1);
  const double ve = tr.envelope(x(2), p_.corner_acc, p_.brake, p_.v_cap);
  b.safe_lo.resize(5);
  b.safe_hi.resize(5);
  b.safe_lo << -a * p_.p_max, -a * p_.ey_max, -a * p_.lat_rate_max, p_.v_min, -p_.epsi_max;
  b.safe_hi << a * p_.p_max, a * p_.ey_max, a * p_.lat_rate_max, ve, p_.epsi_max;
  const double half = 0.5 * tp.lane_width;
  const double lat_h = tp.v_max * std::sin(tp.epsi_max);
  b.env_lo.resize(5);
  b.env_hi.resize(5);
  b.env_lo << -(half + p_.tau * lat_h), -half, -lat_h, 0.0, -tp.epsi_max;
  b.env_hi << half + p_.tau * lat_h, half, lat_h, tp.v_max, tp.epsi_max;
  return b;
}

std::optional<State> TrackSafeSet::propose(const Environment& env, Rng& rng) const {
  const auto& tr = dynamic_cast<const TrackEnv&>(env);
  State x(4);
  const double v = uniform(rng, p_.v_min, p_.v_cap);
  const double lat = uniform(rng, -p_.lat_rate_max, p_.lat_rate_max);
  x << v, std::asin(std::clamp(lat / v, -1.0, 1.0)), uniform(rng, 0.0, tr.length()),
      uniform(rng, -p_.ey_max, p_.ey_max);
  return x;
}

std::shared_ptr<SafeSet> TrackSafeSet::scaled(double alpha) const {
  return std::make_shared<TrackSafeSet>(p_, alpha_ * alpha);
}

nlohmann::json TrackSafeSet::params() const {
  return {{"alpha", alpha_},          {"p_max", p_.p_max},       {"ey_max", p_.ey_max},
          {"lat_rate_max", p_.lat_rate_max}, {"corner_acc", p_.corner_acc}, {"brake", p_.brake},
          {"v_cap", p_.v_cap},        {"tau", p_.tau}};
}

}  // namespace hpl
