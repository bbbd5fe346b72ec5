#include "hpl/safety.hpp"

#include <algorithm>
#include <cmath>

#include "hpl/errors.hpp"

namespace hpl {

double BoxSafeSet::blended_violation(const Environment& env, const State& x, double beta) const {
  if (beta < 0.0 || beta > 1.0) throw ContractError("beta must lie in [0, 1]");
  double v = env.violation(x);
  const Bounds b = bounds(env, x);
  for (Eigen::Index i = 0; i < b.coord.size(); ++i) {
    const double lo = (1.0 - beta) * b.safe_lo(i) + beta * b.env_lo(i);
    const double hi = (1.0 - beta) * b.safe_hi(i) + beta * b.env_hi(i);
    const double c = b.coord(i);
    if (c < lo) v += lo - c;
    if (c > hi) v += c - hi;
  }
  return v;
}

nlohmann::json InvarianceReport::to_json() const {
  nlohmann::json j;
  j["env_id"] = env_id;
  j["n_samples"] = n_samples;
  j["horizon"] = horizon;
  j["seed"] = seed;
  j["coverage"] = coverage;
  j["proposals"] = proposals;
  j["violations"] = nlohmann::json::array();
  for (const auto& v : violations) {
    j["violations"].push_back({{"sample", v.sample},
                               {"step", v.step},
                               {"kind", v.kind},
                               {"x", std::vector<double>(v.x.data(), v.x.data() + v.x.size())}});
  }
  return j;
}

std::vector<State> sample_members(const SafeSet& ss, const Environment& env, int n, Rng& rng,
                                  int max_proposals) {
  std::vector<State> out;
  for (int p = 0; p < max_proposals && static_cast<int>(out.size()) < n; ++p) {
    auto x = ss.propose(env, rng);
    if (x && ss.contains(env, *x)) out.push_back(*x);
  }
  return out;
}

InvarianceReport verify_invariance(const SafeSet& ss, const SafetyPolicy& sp, const Environment& env,
                                   int n_samples, int horizon, std::uint64_t seed) {
  InvarianceReport rep;
  rep.env_id = env.id();
  rep.horizon = horizon;
  rep.seed = seed;
  if (n_samples <= 0) return rep;

  Rng rng = substream(seed, "verify");
  int accepted = 0;
  const int max_prop = 1000 * n_samples;
  while (accepted < n_samples && rep.proposals < max_prop) {
    ++rep.proposals;
    auto cand = ss.propose(env, rng);
    if (!cand || !ss.contains(env, *cand)) continue;
    const int sample = accepted++;
    State x = *cand;
    for (int t = 0; t < horizon; ++t) {
      const Input u = sp.input(env, x);
      if (!env.input_space().contains(u)) {
        rep.violations.push_back({sample, t, "input", x});
        break;
      }
      x = env.step(x, u);
      if (!env.constraints_ok(x)) {
        rep.violations.push_back({sample, t + 1, "state", x});
        break;
      }
      if (!ss.contains(env, x)) {
        rep.violations.push_back({sample, t + 1, "safe_set", x});
        break;
      }
    }
  }
  rep.n_samples = accepted;
  rep.coverage = rep.proposals ? static_cast<double>(accepted) / rep.proposals : 0.0;
  return rep;
}

SafeSetEstimate estimate_safe_set(const SafeSet& family, const SafetyPolicy& sp,
                                  const std::vector<EnvPtr>& envs, const GridSpec& grid, int horizon,
                                  std::uint64_t seed) {
  std::vector<double> alphas = grid.alphas;
  std::sort(alphas.begin(), alphas.end(), std::greater<>());
  for (double a : alphas) {
    auto cand = family.scaled(a);
    bool ok = true;
    for (size_t e = 0; e < envs.size() && ok; ++e) {
      const auto rep = verify_invariance(*cand, sp, *envs[e], grid.n_samples, horizon,
                                         substream_seed(seed, "estimate", e));
      ok = rep.violations.empty();
    }
    if (ok) return {cand, a};
  }
  throw std::runtime_error(
      "estimate_safe_set: no member of the family is invariant; try a different safety policy");
}

}  // namespace hpl
