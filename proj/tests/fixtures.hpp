#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hpl/demonstrator.hpp"
#include "hpl/strategy.hpp"
#include "hpl/tasks.hpp"

namespace fixtures {

inline std::vector<hpl::Demonstration> tube_demos(int n, std::uint64_t seed = 1, int first = 0) {
  std::vector<hpl::Demonstration> out;
  for (int i = 0; i < n; ++i) {
    auto env = hpl::make_env("tube", seed, first + i);
    auto d = hpl::demonstrate(env, seed);
    if (d.execution) out.push_back({env, *d.execution});
  }
  return out;
}

// Small tube strategy shared by the tests of one binary.
inline const hpl::Strategy& tiny_tube_strategy() {
  static const hpl::Strategy s = [] {
    const auto ds = hpl::build_dataset(tube_demos(4), 10, 5);
    hpl::TrainConfig tc;
    tc.max_points = 150;
    tc.fit.restarts = 2;
    tc.fit.iterations = 40;
    return hpl::train_strategy(ds, tc);
  }();
  return s;
}

inline std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("hpl_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace fixtures
