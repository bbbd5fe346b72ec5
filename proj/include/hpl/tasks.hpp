#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hpl/environment.hpp"
#include "hpl/safety.hpp"

namespace hpl {

// Safe set and safety policy shipped for each family.
struct SafetyPair {
  SafeSetPtr safe_set;
  SafetyPolicyPtr policy;
};
SafetyPair make_safety(const std::string& family, const nlohmann::json& env_params = {});

// Seeded, reproducible task instances. Track instances >= 0 are generated
// layouts; index -1 loads the shipped layout.
EnvPtr make_env(const std::string& family, std::uint64_t seed, int index, const nlohmann::json& env_params = {});
std::vector<EnvPtr> generate_tasks(const std::string& family, int n, std::uint64_t seed, int first_index = 0,
                                   const nlohmann::json& env_params = {});

std::string shipped_track_path();

}  // namespace hpl
