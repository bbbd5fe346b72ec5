#include "hpl/tasks.hpp"

#include "hpl/errors.hpp"
#include "hpl/flappy.hpp"
#include "hpl/track.hpp"
#include "hpl/tube.hpp"

namespace hpl {

namespace {

FlappyParams flappy_params(const nlohmann::json& j) {
  FlappyParams p;
  if (j.is_object()) {
    p.target_pipes = j.value("target_pipes", p.target_pipes);
    p.gap = j.value("gap", p.gap);
    p.spacing = j.value("spacing", p.spacing);
    p.gap_lo = j.value("gap_lo", p.gap_lo);
    p.gap_hi = j.value("gap_hi", p.gap_hi);
    p.visibility = j.value("visibility", p.visibility);
  }
  return p;
}

}  // namespace

std::string shipped_track_path() { return std::string(HPL_DATA_DIR) + "/tracks/ae.csv"; }

SafetyPair make_safety(const std::string& family, const nlohmann::json& env_params) {
  if (family == "tube") {
    TubeSafetyParams p;
    return {std::make_shared<TubeSafeSet>(p), std::make_shared<TubeSafetyPolicy>(p)};
  }
  if (family == "track") {
    TrackSafetyParams p;
    return {std::make_shared<TrackSafeSet>(p), std::make_shared<TrackSafetyPolicy>(p)};
  }
  if (family == "flappy") {
    FlappySafetyParams sp;
    return {std::make_shared<FlappySafeSet>(flappy_params(env_params), sp), std::make_shared<FlappySafetyPolicy>(sp)};
  }
  throw ConfigError("unknown environment family '" + family + "'");
}

EnvPtr make_env(const std::string& family, std::uint64_t seed, int index, const nlohmann::json& env_params) {
  if (family == "tube") return make_tube(seed, index);
  if (family == "track") {
    if (index < 0) return load_track_csv(shipped_track_path(), "track-ae");
    return make_track(seed, index);
  }
  if (family == "flappy") return make_flappy(seed, index, flappy_params(env_params));
  throw ConfigError("unknown environment family '" + family + "'");
}

std::vector<EnvPtr> generate_tasks(const std::string& family, int n, std::uint64_t seed, int first_index,
                                   const nlohmann::json& env_params) {
  std::vector<EnvPtr> out;
  for (int i = 0; i < n; ++i) out.push_back(make_env(family, seed, first_index + i, env_params));
  return out;
}

}  // namespace hpl
