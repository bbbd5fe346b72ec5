#include "hpl/targets.hpp"

#include <algorithm>

#include "hpl/errors.hpp"

namespace hpl {

TargetSet TargetSet::empty(int created, int due) {
  TargetSet t;
  t.created_ = created;
  t.due_ = due;
  return t;
}

TargetSet lift_box(const Vec& lo, const Vec& hi, SafeSetPtr ss, EnvPtr view, const State& anchor, double beta,
                   int created, int due) {
  if (beta < 0.0 || beta > 1.0) throw ContractError("lift: beta must lie in [0, 1]");
  if (!ss || !view) throw ContractError("lift: safe set and environment are required");
  if (lo.size() != view->strategy_dim() || hi.size() != lo.size())
    throw ContractError("lift: box dimension does not match the strategy state");
  TargetSet t;
  t.empty_ = false;
  t.lo_ = lo;
  t.hi_ = hi;
  t.ss_ = std::move(ss);
  t.view_ = std::move(view);
  t.anchor_ = anchor;
  t.beta_ = beta;
  t.created_ = created;
  t.due_ = due;
  return t;
}

TargetSet lift(const StrategySet& box, SafeSetPtr ss, EnvPtr view, const State& anchor, double beta,
               int created, int due) {
  TargetSet t = lift_box(box.state_lo, box.state_hi, std::move(ss), std::move(view), anchor, beta, created, due);
  t.ulo_ = box.input_lo;
  t.uhi_ = box.input_hi;
  return t;
}

double TargetSet::distance(const State& x) const {
  if (empty_) throw ContractError("distance_to_target: target set is empty");
  const Vec g = view_->strategy_state(x, anchor_);
  double d2 = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double c = std::clamp(g(i), lo_(i), hi_(i));
    d2 += (g(i) - c) * (g(i) - c);
  }
  return std::sqrt(d2) + kPredicatePenalty * ss_->blended_violation(*view_, x, beta_);
}

bool TargetSet::contains(const State& x) const { return !empty_ && distance(x) == 0.0; }

double distance_to_target(const State& x, const TargetSet& t) { return t.distance(x); }

nlohmann::json TargetSet::to_json() const {
  nlohmann::json j{{"empty", empty_}, {"created", created_}, {"due", due_}};
  if (!empty_) {
    j["lo"] = std::vector<double>(lo_.data(), lo_.data() + lo_.size());
    j["hi"] = std::vector<double>(hi_.data(), hi_.data() + hi_.size());
    j["beta"] = beta_;
    if (ulo_.size()) {
      j["input_lo"] = std::vector<double>(ulo_.data(), ulo_.data() + ulo_.size());
      j["input_hi"] = std::vector<double>(uhi_.data(), uhi_.data() + uhi_.size());
    }
  }
  return j;
}

SetList::SetList(int T) {
  if (T < 1) throw ContractError("SetList: T must be >= 1");
  slots_.assign(static_cast<size_t>(T), TargetSet::empty());
}

void SetList::push(TargetSet t) {
  slots_.pop_front();
  slots_.push_back(std::move(t));
}

bool SetList::all_empty() const {
  return std::all_of(slots_.begin(), slots_.end(), [](const TargetSet& t) { return t.is_empty(); });
}

}  // namespace hpl
