#include "nsca/random.hpp"

namespace nsca {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view subsystem,
                          std::initializer_list<std::uint64_t> path) {
  // FNV-1a over the name, then chained through splitmix64.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : subsystem) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  std::uint64_t state = seed ^ h;
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t p : path) {
    state ^= p + 0x632BE59BD9B4E019ULL;
    out = splitmix64(state);
  }
  return out;
}

}  // namespace nsca
