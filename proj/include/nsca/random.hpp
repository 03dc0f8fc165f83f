#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace nsca {

/// One step of the splitmix64 sequence.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Seed for the stream named `subsystem` under `seed`, refined by `path`
/// (trial number, channel, ...). Distinct names give independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view subsystem,
                          std::initializer_list<std::uint64_t> path = {});

inline std::mt19937_64 make_rng(std::uint64_t seed, std::string_view subsystem,
                                std::initializer_list<std::uint64_t> path = {}) {
  return std::mt19937_64(derive_seed(seed, subsystem, path));
}

}  // namespace nsca
