#include "hpl/flappy.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <json.hpp>

#include "hpl/errors.hpp"
#include "hpl/rng.hpp"

namespace hpl {

namespace {

std::int64_t pack(int x, int y, int v) {
  return (static_cast<std::int64_t>(x) << 32) ^ (static_cast<std::int64_t>(y + 32768) << 16) ^
         static_cast<std::int64_t>(v + 32768);
}

int ifloor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

}  // namespace

FlappyEnv::FlappyEnv(std::uint64_t seed, std::string id, FlappyParams p, int known)
    : seed_(seed), id_(std::move(id)), p_(p), known_(known) {
  if (p_.gap_hi < p_.gap_lo || p_.pipe_width >= p_.spacing || p_.spacing % 4 || p_.first_pipe % 4) {
    throw ContractError("flappy: inconsistent pipe geometry");
  }
  input_space_.kind = InputKind::Binary;
  input_space_.lo = Vec::Zero(1);
  input_space_.hi = Vec::Ones(1);
}

int FlappyEnv::gap_low(int i) const {
  const auto span = static_cast<std::uint64_t>(p_.gap_hi - p_.gap_lo + 1);
  return p_.gap_lo + static_cast<int>(substream_seed(seed_, "pipe", static_cast<std::uint64_t>(i)) % span);
}

int FlappyEnv::next_pipe(double x) const {
  const int xi = static_cast<int>(std::floor(x));
  const int num = xi - p_.first_pipe - p_.pipe_width;
  if (num <= 0) return 0;
  return (num + p_.spacing - 1) / p_.spacing;
}

int FlappyEnv::score(const State& x) const {
  // pipe i is passed once its right edge is strictly behind the bird
  const int xi = static_cast<int>(std::floor(x(0)));
  const int num = xi - p_.first_pipe - p_.pipe_width - 1;
  if (num < 0) return 0;
  return num / p_.spacing + 1;
}

int FlappyEnv::known_at(double x) const {
  const int reach = static_cast<int>(std::floor(x)) + p_.visibility - p_.first_pipe;
  const int n = reach < 0 ? 0 : reach / p_.spacing + 1;
  return std::min(n, known_);
}

State FlappyEnv::initial_state() const {
  State x(3);
  x << 0.0, p_.start_y, 0.0;
  return x;
}

State FlappyEnv::step(const State& x, const Input& u) const {
  State n(3);
  n(0) = x(0) + 4.0;
  n(1) = x(1) + x(2);
  n(2) = x(2) - 1.0 + 16.0 * u(0);
  return n;
}

double FlappyEnv::violation(const State& x) const {
  const double y = x(1);
  double v = std::max(0.0, -y) + std::max(0.0, y - p_.height);
  const int i = ifloor_div(static_cast<int>(std::floor(x(0))) - p_.first_pipe, p_.spacing);
  if (i >= 0 && i < known_) {
    const int px = pipe_x(i);
    if (x(0) >= px && x(0) <= px + p_.pipe_width) {
      const double lo = gap_low(i), hi = lo + p_.gap;
      v += std::max(0.0, lo - y) + std::max(0.0, y - hi);
    }
  }
  return v;
}

Vec FlappyEnv::theta(const State& x) const {
  const int i = next_pipe(x(0));
  Vec t(3);
  t(0) = i < known_ ? pipe_x(i) - x(0) : static_cast<double>(p_.spacing);
  t(1) = i < known_ ? gap_center(i) : p_.fill;
  t(2) = i + 1 < known_ ? gap_center(i + 1) : p_.fill;
  return t;
}

Mat FlappyEnv::forecast(const State& x, int N) const {
  Mat f(N + 1, 3);
  State y = x;
  for (int j = 0; j <= N; ++j) {
    y(0) = x(0) + 4.0 * j;
    f.row(j) = theta(y).transpose();
  }
  return f;
}

Vec FlappyEnv::strategy_state(const State& x, const State& anchor) const {
  const int i = next_pipe(anchor(0));
  Vec g(2);
  g(0) = (i < known_ ? gap_center(i) : p_.fill) - x(1);
  g(1) = (i + 1 < known_ ? gap_center(i + 1) : p_.fill) - x(1);
  return g;
}

Vec FlappyEnv::query_state(const State& x) const {
  Vec z(3);
  z << 0.0, x(1), x(2);
  return z;
}

std::shared_ptr<const Environment> FlappyEnv::view_at(const State& x) const {
  const int k = known_at(x(0));
  if (k == known_) return shared_from_this();
  std::lock_guard<std::mutex> lock(mu_);
  auto it = views_.find(k);
  if (it != views_.end()) return it->second;
  auto v = std::make_shared<FlappyEnv>(seed_, id_, p_, k);
  views_.emplace(k, v);
  while (views_.size() > 4) views_.erase(views_.begin());
  return v;
}

nlohmann::json FlappyEnv::describe() const {
  std::vector<int> gaps;
  for (int i = 0; i < std::min(p_.target_pipes + 2, 1000); ++i) gaps.push_back(gap_low(i));
  return {{"family", "flappy"},      {"id", id_},
          {"seed", seed_},           {"pipe_width", p_.pipe_width},
          {"gap", p_.gap},           {"spacing", p_.spacing},
          {"first_pipe", p_.first_pipe}, {"visibility", p_.visibility},
          {"height", p_.height},     {"target_pipes", p_.target_pipes},
          {"gap_low", gaps}};
}

FlappyPtr make_flappy(std::uint64_t seed, int index, FlappyParams p) {
  const auto s = substream_seed(seed, "flappy", static_cast<std::uint64_t>(index));
  return std::make_shared<FlappyEnv>(s, "flappy-" + std::to_string(seed) + "-" + std::to_string(index), p);
}

double FlappySafetyPolicy::reference(const FlappyEnv& env, double x) const {
  // The input chosen at a pipe's right edge only moves the bird past it, so
  // from there on the following pipe is the one to aim for.
  const int i = env.next_pipe(x + 4.0);
  if (i < env.known() && env.pipe_x(i) - x <= p_.use_distance) return env.gap_center(i);
  return p_.idle_ref;
}

bool FlappySafetyPolicy::flap(double y, double v, double r) const {
  if (v > 0 || y + v >= r - p_.margin_low) return false;
  const double y1 = y + v, v1 = v + 15.0;
  const double apex = v1 > 0 ? y1 + v1 * (v1 + 1.0) / 2.0 : y1;
  return apex <= r + p_.peak_above;
}

Input FlappySafetyPolicy::input(const Environment& env, const State& x) const {
  const auto& fe = dynamic_cast<const FlappyEnv&>(env);
  const auto view = std::static_pointer_cast<const FlappyEnv>(fe.view_at(x));
  Input u(1);
  u(0) = flap(x(1), x(2), reference(*view, x(0))) ? 1.0 : 0.0;
  return u;
}

ReadySet::ReadySet(const FlappyParams& fp, const FlappySafetyParams& sp, double alpha) {
  const double cy = 0.5 * (sp.ready_y_lo + sp.ready_y_hi), hy = 0.5 * (sp.ready_y_hi - sp.ready_y_lo);
  const double cv = 0.5 * (sp.ready_v_lo + sp.ready_v_hi), hv = 0.5 * (sp.ready_v_hi - sp.ready_v_lo);
  y0_ = static_cast<int>(std::ceil(cy - alpha * hy));
  const int y1 = static_cast<int>(std::floor(cy + alpha * hy));
  v0_ = static_cast<int>(std::ceil(cv - alpha * hv));
  const int v1 = static_cast<int>(std::floor(cv + alpha * hv));
  ny_ = std::max(0, y1 - y0_ + 1);
  nv_ = std::max(0, v1 - v0_ + 1);
  const int n = ny_ * nv_;
  const int ng = fp.gap_hi - fp.gap_lo + 1;
  const int D = sp.use_distance, S = fp.spacing, W = fp.pipe_width;
  if (D > S - W || D % 4) throw ContractError("flappy: use_distance must be a multiple of 4 and <= spacing - width");
  FlappySafetyPolicy pol(sp);

  // Successor of each (state, gap) pair over one pipe period, or -1.
  std::vector<int> succ(static_cast<size_t>(n) * ng, -1);
  for (int s = 0; s < n; ++s) {
    const int ys = y0_ + s / nv_, vs = v0_ + s % nv_;
    if (ys < 0 || ys > fp.height) continue;
    for (int gi = 0; gi < ng; ++gi) {
      const int g = fp.gap_lo + gi;
      const double r = g + 0.5 * fp.gap;
      int x = -D, y = ys, v = vs;
      bool ok = true;
      while (x < S - D) {
        const double ref = x < W ? r : sp.idle_ref;
        const int u = pol.flap(y, v, ref) ? 1 : 0;
        y += v;
        v += -1 + 16 * u;
        x += 4;
        if (y < 0 || y > fp.height || (x >= 0 && x <= W && (y < g || y > g + fp.gap))) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      if (y < y0_ || y >= y0_ + ny_ || v < v0_ || v >= v0_ + nv_) continue;
      succ[static_cast<size_t>(s) * ng + gi] = (y - y0_) * nv_ + (v - v0_);
    }
  }
  in_.assign(static_cast<size_t>(n), 1);
  for (int s = 0; s < n; ++s) {
    const int ys = y0_ + s / nv_;
    if (ys < 0 || ys > fp.height) in_[s] = 0;
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (int s = 0; s < n; ++s) {
      if (!in_[s]) continue;
      for (int gi = 0; gi < ng; ++gi) {
        const int t = succ[static_cast<size_t>(s) * ng + gi];
        if (t < 0 || !in_[t]) {
          in_[s] = 0;
          changed = true;
          break;
        }
      }
    }
  }
  count_ = static_cast<int>(std::count(in_.begin(), in_.end(), 1));
}

bool ReadySet::contains(int y, int v) const {
  const int iy = y - y0_, iv = v - v0_;
  if (iy < 0 || iy >= ny_ || iv < 0 || iv >= nv_) return false;
  return in_[static_cast<size_t>(iy) * nv_ + iv] != 0;
}

namespace {

std::shared_ptr<const ReadySet> cached_ready(const FlappyParams& fp, const FlappySafetyParams& sp,
                                             double alpha) {
  using Key = std::tuple<int, int, int, int, int, int, int, int, int, int, int, int, int, double, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const ReadySet>> cache;
  const Key key{fp.height, fp.pipe_width, fp.gap,     fp.spacing,  fp.gap_lo,
                fp.gap_hi, sp.use_distance, sp.margin_low, sp.peak_above, sp.ready_y_lo,
                sp.ready_y_hi, sp.ready_v_lo, sp.ready_v_hi, sp.idle_ref, alpha};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto r = std::make_shared<const ReadySet>(fp, sp, alpha);
  cache.emplace(key, r);
  return r;
}

}  // namespace

FlappySafeSet::FlappySafeSet(FlappyParams fp, FlappySafetyParams sp, double alpha)
    : fp_(fp), sp_(sp), policy_(sp), alpha_(alpha), ready_(cached_ready(fp, sp, alpha)) {}

bool FlappySafeSet::member(const FlappyEnv& view, const State& x0, double beta) const {
  if (view.violation(x0) > 0.0) return false;
  const int x_end = view.pipe_x(view.known()) - sp_.use_distance;
  const int xs = static_cast<int>(x0(0));
  if (xs > x_end || (x_end - xs) % 4) return false;
  if (beta > 0.0) {
    const double limit = xs + (1.0 - beta) * (x_end - xs);
    State x = x0;
    Input u(1);
    while (x(0) < limit) {
      u(0) = policy_.flap(x(1), x(2), policy_.reference(view, x(0))) ? 1.0 : 0.0;
      x = view.step(x, u);
      if (view.violation(x) > 0.0) return false;
    }
    return true;
  }
  auto& memo = view.memo();
  int x = xs, y = static_cast<int>(x0(1)), v = static_cast<int>(x0(2));
  std::vector<std::int64_t> path;
  char verdict = -1;
  State s(3);
  while (true) {
    const auto key = pack(x, y, v);
    const auto it = memo.find(key);
    if (it != memo.end()) {
      verdict = it->second;
      break;
    }
    path.push_back(key);
    if (x >= x_end) {
      verdict = ready_->contains(y, v) ? 1 : 0;
      break;
    }
    const int u = policy_.flap(y, v, policy_.reference(view, x)) ? 1 : 0;
    y += v;
    v += -1 + 16 * u;
    x += 4;
    s << x, y, v;
    if (view.violation(s) > 0.0) {
      verdict = 0;
      break;
    }
  }
  for (auto k : path) memo.emplace(k, verdict);
  return verdict == 1;
}

double FlappySafeSet::blended_violation(const Environment& env, const State& x, double beta) const {
  if (beta < 0.0 || beta > 1.0) throw ContractError("beta must lie in [0, 1]");
  const auto& fe = dynamic_cast<const FlappyEnv&>(env);
  const auto view = std::static_pointer_cast<const FlappyEnv>(fe.view_at(x));
  const double ev = view->violation(x);
  if (ev > 0.0) return ev;
  if (beta >= 1.0) return 0.0;
  return member(*view, x, beta) ? 0.0 : 1.0;
}

std::optional<State> FlappySafeSet::propose(const Environment& env, Rng& rng) const {
  (void)env;
  const int span = (fp_.first_pipe + 12 * fp_.spacing) / 4;
  State x(3);
  x << 4.0 * std::uniform_int_distribution<int>(0, span)(rng),
      std::uniform_int_distribution<int>(0, fp_.height)(rng),
      std::uniform_int_distribution<int>(sp_.ready_v_lo, sp_.ready_v_hi)(rng);
  return x;
}

std::shared_ptr<SafeSet> FlappySafeSet::scaled(double alpha) const {
  return std::make_shared<FlappySafeSet>(fp_, sp_, alpha_ * alpha);
}

nlohmann::json FlappySafeSet::params() const {
  return {{"alpha", alpha_},
          {"use_distance", sp_.use_distance},
          {"margin_low", sp_.margin_low},
          {"peak_above", sp_.peak_above},
          {"ready_states", ready_->size()}};
}

}  // namespace hpl
