#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hpl {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Named substream of a global seed, e.g. substream(seed, "fit", dim).
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);
Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

double uniform(Rng& rng, double lo, double hi);
double normal(Rng& rng);

}  // namespace hpl
