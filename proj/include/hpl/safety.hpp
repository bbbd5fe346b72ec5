#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hpl/environment.hpp"
#include "hpl/rng.hpp"

namespace hpl {

// Parametric safe set X_E. Membership may depend on the environment
// instance, so every query takes the environment explicitly.
class SafeSet {
 public:
  virtual ~SafeSet() = default;

  // 0 iff x lies in blend(beta) intersected with X(Theta); beta = 0 is X_E
  // itself. Positive values measure the excess over the blended bounds.
  virtual double blended_violation(const Environment& env, const State& x, double beta) const = 0;
  bool contains(const Environment& env, const State& x) const {
    return blended_violation(env, x, 0.0) == 0.0;
  }

  // Draws a state from a proposal region around the set; returns nullopt
  // when the draw is rejected.
  virtual std::optional<State> propose(const Environment& env, Rng& rng) const = 0;

  // Member of the monotone family used by estimate_safe_set; alpha in (0, 1]
  // shrinks the set towards its core.
  virtual std::shared_ptr<SafeSet> scaled(double alpha) const = 0;
  virtual nlohmann::json params() const = 0;
};

class SafetyPolicy {
 public:
  virtual ~SafetyPolicy() = default;
  virtual Input input(const Environment& env, const State& x) const = 0;
};

using SafeSetPtr = std::shared_ptr<const SafeSet>;
using SafetyPolicyPtr = std::shared_ptr<const SafetyPolicy>;

// Safe set whose non-strategy description is a box in environment-specific
// coordinates. Subclasses fill the coordinate vector and, per coordinate, the
// safe-set bounds and the corresponding hull bounds of X(Theta).
class BoxSafeSet : public SafeSet {
 public:
  struct Bounds {
    Vec coord, safe_lo, safe_hi, env_lo, env_hi;
  };
  virtual Bounds bounds(const Environment& env, const State& x) const = 0;
  double blended_violation(const Environment& env, const State& x, double beta) const override;
};

struct Violation {
  int sample = 0;
  int step = 0;
  std::string kind;  // "state", "safe_set", "input"
  State x;
};

struct InvarianceReport {
  std::string env_id;
  int n_samples = 0;
  int horizon = 0;
  std::uint64_t seed = 0;
  std::vector<Violation> violations;
  double coverage = 0.0;  // accepted proposals / proposals drawn
  int proposals = 0;

  nlohmann::json to_json() const;
};

InvarianceReport verify_invariance(const SafeSet& ss, const SafetyPolicy& sp, const Environment& env,
                                   int n_samples, int horizon, std::uint64_t seed);

// Samples proposals until n members are drawn or max_proposals is hit.
std::vector<State> sample_members(const SafeSet& ss, const Environment& env, int n, Rng& rng,
                                  int max_proposals);

struct GridSpec {
  int n_samples = 200;
  std::vector<double> alphas = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
};

// Largest member of the scaled family (descending alpha ladder) whose
// sampled members all pass verify_invariance.
struct SafeSetEstimate {
  std::shared_ptr<SafeSet> set;
  double alpha = 0.0;
};
SafeSetEstimate estimate_safe_set(const SafeSet& family, const SafetyPolicy& sp,
                                  const std::vector<EnvPtr>& envs, const GridSpec& grid, int horizon,
                                  std::uint64_t seed);

}  // namespace hpl
