#pragma once

#include <deque>

#include "hpl/environment.hpp"
#include "hpl/safety.hpp"
#include "hpl/strategy.hpp"

namespace hpl {

constexpr double kPredicatePenalty = 10.0;

// Lifted target set: {x : g(x, Theta) in box} intersected with the
// beta-blend of X_E and X(Theta). An empty set is an explicit variant.
class TargetSet {
 public:
  TargetSet() = default;  // empty
  static TargetSet empty(int created = 0, int due = 0);

  bool is_empty() const { return empty_; }
  bool contains(const State& x) const;
  // Box distance of g(x) plus kPredicatePenalty times the blended-predicate
  // excess; 0 iff contains(x).
  double distance(const State& x) const;

  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  const Vec& input_lo() const { return ulo_; }
  const Vec& input_hi() const { return uhi_; }
  double beta() const { return beta_; }
  int created() const { return created_; }
  int due() const { return due_; }
  const State& anchor() const { return anchor_; }
  const EnvPtr& view() const { return view_; }
  nlohmann::json to_json() const;

  friend TargetSet lift(const StrategySet& box, SafeSetPtr ss, EnvPtr view, const State& anchor, double beta,
                        int created, int due);
  // Box given directly in strategy coordinates (tests, tooling).
  friend TargetSet lift_box(const Vec& lo, const Vec& hi, SafeSetPtr ss, EnvPtr view, const State& anchor,
                            double beta, int created, int due);

 private:
  bool empty_ = true;
  Vec lo_, hi_, ulo_, uhi_;
  SafeSetPtr ss_;
  EnvPtr view_;
  State anchor_;
  double beta_ = 0.0;
  int created_ = 0, due_ = 0;
};

TargetSet lift(const StrategySet& box, SafeSetPtr ss, EnvPtr view, const State& anchor, double beta,
               int created, int due);
TargetSet lift_box(const Vec& lo, const Vec& hi, SafeSetPtr ss, EnvPtr view, const State& anchor, double beta,
                   int created, int due);

double distance_to_target(const State& x, const TargetSet& t);

// Shift register of exactly T target sets, oldest first. Slot j holds the
// set due at step k + j + 1.
class SetList {
 public:
  explicit SetList(int T = 1);
  void push(TargetSet t);
  int size() const { return static_cast<int>(slots_.size()); }
  const TargetSet& operator[](int j) const { return slots_[static_cast<size_t>(j)]; }
  bool all_empty() const;

 private:
  std::deque<TargetSet> slots_;
};

}  // namespace hpl
