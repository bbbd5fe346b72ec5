#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "hpl/environment.hpp"
#include "hpl/safety.hpp"

namespace hpl {

struct FlappyParams {
  int height = 404;       // playfield y in [0, height]
  int pipe_width = 52;
  int gap = 100;
  int spacing = 144;      // horizontal distance between pipes
  int first_pipe = 300;
  int gap_lo = 82;        // lower gap edge drawn uniformly from [gap_lo, gap_hi]
  int gap_hi = 224;
  int visibility = 232;   // pipes with px <= x + visibility are known
  int start_y = 202;
  int target_pipes = 200; // task target set: pass this many pipes
  double fill = 202.0;    // descriptor value for unknown pipes
};

// State [x, y, v_y], input u in {0, 1}:
//   x+ = x + 4, y+ = y + v_y, v_y+ = v_y - 1 + 16 u.
class FlappyEnv : public Environment, public std::enable_shared_from_this<FlappyEnv> {
 public:
  static constexpr int kUnlimited = std::numeric_limits<int>::max();

  FlappyEnv(std::uint64_t seed, std::string id, FlappyParams p = {}, int known = kUnlimited);

  std::string family() const override { return "flappy"; }
  std::string id() const override { return id_; }
  int state_dim() const override { return 3; }
  const InputSpace& input_space() const override { return input_space_; }
  double dt() const override { return 1.0; }
  State initial_state() const override;
  State step(const State& x, const Input& u) const override;
  double violation(const State& x) const override;
  int theta_dim() const override { return 3; }
  Vec theta(const State& x) const override;
  Mat forecast(const State& x, int N) const override;
  bool task_done(const State& x) const override { return score(x) >= p_.target_pipes; }
  int strategy_dim() const override { return 2; }
  Vec strategy_state(const State& x, const State& anchor) const override;
  int strategy_input_dim() const override { return 0; }
  Vec strategy_input(const Input&) const override { return Vec(0); }
  Vec query_state(const State& x) const override;
  std::shared_ptr<const Environment> view_at(const State& x) const override;
  nlohmann::json describe() const override;

  const FlappyParams& params() const { return p_; }
  std::uint64_t seed() const { return seed_; }
  int known() const { return known_; }
  bool is_view() const { return known_ != kUnlimited; }

  int pipe_x(int i) const { return p_.first_pipe + i * p_.spacing; }
  int gap_low(int i) const;  // lower edge of pipe i's gap
  double gap_center(int i) const { return gap_low(i) + 0.5 * p_.gap; }
  // Index of the first pipe whose right edge is not yet behind x.
  int next_pipe(double x) const;
  int score(const State& x) const override;
  // Number of pipes known at position x.
  int known_at(double x) const;

  // Membership memo used by the safe set; keyed by packed (x, y, v).
  std::unordered_map<std::int64_t, char>& memo() const { return memo_; }

 private:
  std::uint64_t seed_;
  std::string id_;
  FlappyParams p_;
  int known_;
  InputSpace input_space_;
  mutable std::vector<int> gaps_;
  mutable std::mutex mu_;
  mutable std::map<int, std::shared_ptr<const FlappyEnv>> views_;
  mutable std::unordered_map<std::int64_t, char> memo_;
};

using FlappyPtr = std::shared_ptr<const FlappyEnv>;
FlappyPtr make_flappy(std::uint64_t seed, int index, FlappyParams p = {});

struct FlappySafetyParams {
  int use_distance = 92;  // a pipe becomes the reference this far ahead
  int margin_low = 0;      // flap when predicted y falls below r - margin_low
  int peak_above = 10;     // ... and the flap's apex stays below r + peak_above
  double idle_ref = 202.0;
  // Candidate box for the ready set, shrunk by alpha around its center.
  int ready_y_lo = 20, ready_y_hi = 384;
  int ready_v_lo = -20, ready_v_hi = 16;
};

class FlappySafetyPolicy : public SafetyPolicy {
 public:
  explicit FlappySafetyPolicy(FlappySafetyParams p = {}) : p_(p) {}
  Input input(const Environment& env, const State& x) const override;
  double reference(const FlappyEnv& env, double x) const;
  bool flap(double y, double v, double r) const;
  const FlappySafetyParams& params() const { return p_; }

 private:
  FlappySafetyParams p_;
};

// Ready set R: (y, v) pairs at the moment an unseen pipe becomes the
// reference, from which the safety policy clears that pipe for every gap
// height and arrives in R again at the next such moment. Computed as the
// greatest fixed point over the candidate box.
class ReadySet {
 public:
  ReadySet(const FlappyParams& fp, const FlappySafetyParams& sp, double alpha);
  bool contains(int y, int v) const;
  int size() const { return count_; }
  int y_lo() const { return y0_; }
  int v_lo() const { return v0_; }
  int ny() const { return ny_; }
  int nv() const { return nv_; }

 private:
  int y0_, v0_, ny_, nv_, count_ = 0;
  std::vector<char> in_;
};

// X_E(view): the safety-policy rollout over the known pipes stays feasible up
// to the point where the first unknown pipe would become the reference and
// ends in the ready set R. Queries on a full environment use view_at(x).
class FlappySafeSet : public SafeSet {
 public:
  explicit FlappySafeSet(FlappyParams fp = {}, FlappySafetyParams sp = {}, double alpha = 1.0);
  double blended_violation(const Environment& env, const State& x, double beta) const override;
  std::optional<State> propose(const Environment& env, Rng& rng) const override;
  std::shared_ptr<SafeSet> scaled(double alpha) const override;
  nlohmann::json params() const override;
  const ReadySet& ready() const { return *ready_; }

 private:
  bool member(const FlappyEnv& view, const State& x, double beta) const;

  FlappyParams fp_;
  FlappySafetyParams sp_;
  FlappySafetyPolicy policy_;
  double alpha_;
  std::shared_ptr<const ReadySet> ready_;
};

}  // namespace hpl
