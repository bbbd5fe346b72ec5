#include "hpl/tube.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "hpl/errors.hpp"

namespace hpl {

TubeEnv::TubeEnv(std::vector<TubeSegment> segs, std::string id, TubeParams p)
    : segs_(std::move(segs)), id_(std::move(id)), p_(p) {
  if (segs_.empty()) throw ContractError("tube: need at least one segment");
  if (!(p_.width > 0.0)) throw ContractError("tube: width must be > 0");
  for (const auto& s : segs_) {
    if (!(s.length >= 2.0 * p_.fillet)) throw ContractError("tube: segment shorter than corner blend");
  }
  input_space_.kind = InputKind::Box;
  input_space_.lo = Vec::Constant(2, -p_.a_max);
  input_space_.hi = Vec::Constant(2, p_.a_max);
  qv_.push_back(0.0);
  cv_.push_back(0.0);
  sv_.push_back(0.0);
  for (const auto& s : segs_) {
    qv_.push_back(qv_.back() + s.length);
    cv_.push_back(cv_.back() + s.slope * s.length);
    sv_.push_back(sv_.back() + s.length * std::sqrt(1.0 + s.slope * s.slope));
  }
  q_end_ = qv_.back();
}

int TubeEnv::seg_index(double q) const {
  // Last segment extends past the end; the first one extends before 0.
  const auto it = std::upper_bound(qv_.begin() + 1, qv_.end() - 1, q);
  return static_cast<int>(it - qv_.begin()) - 1;
}

double TubeEnv::center(double q) const {
  const int i = seg_index(q);
  return cv_[i] + segs_[i].slope * (q - qv_[i]);
}

double TubeEnv::slope(double q) const { return segs_[seg_index(q)].slope; }

double TubeEnv::arc(double q) const {
  const int i = seg_index(q);
  const double m = segs_[i].slope;
  return sv_[i] + (q - qv_[i]) * std::sqrt(1.0 + m * m);
}

double TubeEnv::q_at_arc(double s) const {
  const auto it = std::upper_bound(sv_.begin() + 1, sv_.end() - 1, s);
  const int i = static_cast<int>(it - sv_.begin()) - 1;
  const double m = segs_[i].slope;
  return qv_[i] + (s - sv_[i]) / std::sqrt(1.0 + m * m);
}

// Interior vertices sit at qv_[1..n-1]; a blend occupies [qv - r, qv + r].
double TubeEnv::center_s(double q) const {
  const double r = p_.fillet;
  const int i = seg_index(q);
  auto blend = [&](int v) {  // v: vertex index
    const double m0 = segs_[v - 1].slope, m1 = segs_[v].slope;
    const double t = q - (qv_[v] - r);
    return cv_[v] - m0 * r + m0 * t + (m1 - m0) * t * t / (4.0 * r);
  };
  if (i >= 1 && q < qv_[i] + r) return blend(i);
  if (i + 1 < static_cast<int>(segs_.size()) && q > qv_[i + 1] - r) return blend(i + 1);
  return center(q);
}

double TubeEnv::slope_s(double q) const {
  const double r = p_.fillet;
  const int i = seg_index(q);
  auto blend = [&](int v) {
    const double m0 = segs_[v - 1].slope, m1 = segs_[v].slope;
    return m0 + (m1 - m0) * (q - (qv_[v] - r)) / (2.0 * r);
  };
  if (i >= 1 && q < qv_[i] + r) return blend(i);
  if (i + 1 < static_cast<int>(segs_.size()) && q > qv_[i + 1] - r) return blend(i + 1);
  return segs_[i].slope;
}

double TubeEnv::curv_s(double q) const {
  const double r = p_.fillet;
  const int i = seg_index(q);
  if (i >= 1 && q < qv_[i] + r) return (segs_[i].slope - segs_[i - 1].slope) / (2.0 * r);
  if (i + 1 < static_cast<int>(segs_.size()) && q > qv_[i + 1] - r)
    return (segs_[i + 1].slope - segs_[i].slope) / (2.0 * r);
  return 0.0;
}

State TubeEnv::initial_state() const {
  State x(4);
  x << 0.0, 0.0, center(0.0), 0.0;
  return x;
}

State TubeEnv::step(const State& x, const Input& u) const {
  const double h = p_.dt;
  State n(4);
  n(0) = x(0) + x(1) * h + 0.5 * u(0) * h * h;
  n(1) = x(1) + u(0) * h;
  n(2) = x(2) + x(3) * h + 0.5 * u(1) * h * h;
  n(3) = x(3) + u(1) * h;
  return n;
}

double TubeEnv::violation(const State& x) const {
  const double half = 0.5 * p_.width;
  double v = std::max(0.0, std::abs(x(2) - center(x(0))) - half);
  v += std::max(0.0, std::abs(x(1)) - p_.v_max);
  v += std::max(0.0, std::abs(x(3)) - p_.v_max);
  return v;
}

Vec TubeEnv::theta(const State& x) const { return Vec::Constant(1, slope(x(0))); }

Mat TubeEnv::forecast(const State& x, int N) const {
  Mat f(N + 1, 1);
  const double s0 = arc(x(0));
  for (int j = 0; j <= N; ++j) f(j, 0) = slope(q_at_arc(s0 + j * p_.spacing));
  return f;
}

Vec TubeEnv::strategy_state(const State& x, const State& anchor) const {
  Vec g(2);
  g << arc(x(0)) - arc(anchor(0)), x(2) - center(x(0));
  return g;
}

Vec TubeEnv::query_state(const State& x) const {
  // Tube-frame version of x: along-tube position is the origin, height is
  // measured from the centerline.
  Vec z(4);
  z << 0.0, x(1), x(2) - center(x(0)), x(3);
  return z;
}

nlohmann::json TubeEnv::describe() const {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : segs_) segs.push_back({{"slope", s.slope}, {"length", s.length}});
  return {{"family", "tube"}, {"id", id_}, {"width", p_.width}, {"dt", p_.dt},
          {"spacing", p_.spacing}, {"segments", segs}};
}

TubePtr make_tube(std::uint64_t seed, int index, const TubeGenSpec& spec, TubeParams p) {
  Rng rng = substream(seed, "tube", static_cast<std::uint64_t>(index));
  const int n = std::uniform_int_distribution<int>(spec.min_segments, spec.max_segments)(rng);
  std::vector<TubeSegment> segs;
  for (int i = 0; i < n; ++i) {
    TubeSegment s;
    s.slope = uniform(rng, spec.min_slope, spec.max_slope);
    s.length = uniform(rng, spec.min_length, spec.max_length);
    segs.push_back(s);
  }
  return std::make_shared<TubeEnv>(std::move(segs), "tube-" + std::to_string(seed) + "-" +
                                                        std::to_string(index), p);
}

TubeParams sharp_tube_params() {
  TubeParams p;
  p.a_max = 2.5;
  return p;
}

TubePtr make_sharp_tube(std::uint64_t seed, int index, TubeParams p) {
  Rng rng = substream(seed, "sharp-tube", static_cast<std::uint64_t>(index));
  std::vector<TubeSegment> segs;
  const int legs = std::uniform_int_distribution<int>(3, 5)(rng);
  double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  segs.push_back({0.0, uniform(rng, 3.0, 5.0)});
  for (int i = 0; i < legs; ++i) {
    segs.push_back({sign * uniform(rng, 0.8, 1.0), uniform(rng, 2.5, 4.0)});
    sign = -sign;
  }
  segs.push_back({0.0, 2.0});
  return std::make_shared<TubeEnv>(std::move(segs), "sharp-tube-" + std::to_string(seed) + "-" +
                                                        std::to_string(index), p);
}

TubePtr tube_from_json(const nlohmann::json& j) {
  try {
    TubeParams p;
    p.width = j.value("width", p.width);
    p.dt = j.value("dt", p.dt);
    p.spacing = j.value("spacing", p.spacing);
    std::vector<TubeSegment> segs;
    for (const auto& s : j.at("segments")) segs.push_back({s.at("slope").get<double>(), s.at("length").get<double>()});
    return std::make_shared<TubeEnv>(std::move(segs), j.value("id", std::string("tube")), p);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("tube spec: ") + e.what());
  }
}

double tube_speed_envelope(const TubeEnv& env, double q, double corner_acc, double brake,
                           double cap, double ydot_cap) {
  const double r = env.params().fillet;
  const auto& qv = env.vertices();
  const auto& segs = env.segments();
  double v = cap;
  auto limit = [&](double start, double vlim) {
    const double d = std::max(0.0, start - q);
    v = std::min(v, std::sqrt(vlim * vlim + 2.0 * brake * d));
  };
  for (size_t j = 0; j < segs.size(); ++j) {
    const double seg_end = qv[j + 1] + r;
    if (seg_end < q && j + 1 < segs.size()) continue;
    const double m = std::abs(segs[j].slope);
    if (m > 0.0) limit(qv[j] - r, ydot_cap / m);
    if (j >= 1) {
      const double dm = std::abs(segs[j].slope - segs[j - 1].slope);
      if (dm > 0.0 && q <= qv[j] + r) limit(qv[j] - r, std::sqrt(corner_acc * 2.0 * r / dm));
    }
  }
  return v;
}

Input TubeSafetyPolicy::track(const TubeEnv& env, const State& x, double q_dot_ref, double aq_max,
                              double tau, double lambda) {
  const double h = env.dt();
  const double amax = env.params().a_max;
  Input u(2);
  u(0) = std::clamp((q_dot_ref - x(1)) / h, -aq_max, aq_max);
  const double q1 = x(0) + x(1) * h + 0.5 * u(0) * h * h;
  const double qd1 = x(1) + u(0) * h;
  const double e = x(2) - env.center_s(x(0));
  const double ed = x(3) - env.slope_s(x(0)) * x(1);
  const double p = e + tau * ed;
  // p_{k+1} is affine in a_y; solve for p_{k+1} = (1 - lambda h) p_k.
  const double base = x(2) + x(3) * h - env.center_s(q1) + tau * (x(3) - env.slope_s(q1) * qd1);
  const double gain = 0.5 * h * h + tau * h;
  u(1) = std::clamp(((1.0 - lambda * h) * p - base) / gain, -amax, amax);
  return u;
}

Input TubeSafetyPolicy::input(const Environment& env, const State& x) const {
  const auto& tube = dynamic_cast<const TubeEnv&>(env);
  const double m = tube.slope_s(x(0));
  const double ve = tube_speed_envelope(tube, x(0), p_.corner_acc, p_.brake, p_.q_dot_cap,
                                        p_.ydot_max - p_.edot_max);
  const double ref = std::min(p_.v_path / std::sqrt(1.0 + m * m), ve);
  return track(tube, x, ref, p_.aq_max, p_.tau, p_.lambda);
}

BoxSafeSet::Bounds TubeSafeSet::bounds(const Environment& env, const State& x) const {
  const auto& tube = dynamic_cast<const TubeEnv&>(env);
  const auto& tp = tube.params();
  const double a = alpha_;
  const double e = x(2) - tube.center_s(x(0));
  const double ed = x(3) - tube.slope_s(x(0)) * x(1);
  Bounds b;
  b.coord.resize(5);
  b.coord << e + p_.tau * ed, e, ed, x(1), x(3);
  const double ve = tube_speed_envelope(tube, x(0), p_.corner_acc, p_.brake, p_.q_dot_cap,
                                        p_.ydot_max - p_.edot_max);
  b.safe_lo.resize(5);
  b.safe_hi.resize(5);
  b.safe_lo << -a * p_.p_max, -a * p_.e_max, -a * p_.edot_max, 0.0, -p_.ydot_max;
  b.safe_hi << a * p_.p_max, a * p_.e_max, a * p_.edot_max, ve, p_.ydot_max;
  // Hulls of X(Theta) in the same coordinates.
  const double half = 0.5 * tp.width + 0.25 * tp.fillet * 2.0;
  const double edh = 2.0 * tp.v_max;
  b.env_lo.resize(5);
  b.env_hi.resize(5);
  b.env_lo << -(half + p_.tau * edh), -half, -edh, -tp.v_max, -tp.v_max;
  b.env_hi << half + p_.tau * edh, half, edh, tp.v_max, tp.v_max;
  return b;
}

std::optional<State> TubeSafeSet::propose(const Environment& env, Rng& rng) const {
  const auto& tube = dynamic_cast<const TubeEnv&>(env);
  State x(4);
  const double q = uniform(rng, 0.0, tube.q_end());
  const double qd = uniform(rng, 0.0, p_.q_dot_cap);
  const double e = uniform(rng, -p_.e_max, p_.e_max);
  const double ed = uniform(rng, -p_.edot_max, p_.edot_max);
  x << q, qd, tube.center_s(q) + e, ed + tube.slope_s(q) * qd;
  return x;
}

std::shared_ptr<SafeSet> TubeSafeSet::scaled(double alpha) const {
  return std::make_shared<TubeSafeSet>(p_, alpha_ * alpha);
}

nlohmann::json TubeSafeSet::params() const {
  return {{"alpha", alpha_},        {"p_max", p_.p_max},         {"e_max", p_.e_max},
          {"edot_max", p_.edot_max}, {"corner_acc", p_.corner_acc}, {"brake", p_.brake},
          {"q_dot_cap", p_.q_dot_cap}, {"tau", p_.tau}};
}

}  // namespace hpl
