#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace promptwall {

// 64-bit LCG used by the simulator. The recurrence is normative (see
// docs/config-schema.md) so independent implementations reproduce runs
// bit-for-bit.
class Lcg64 {
 public:
  explicit Lcg64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ = 6364136223846793005ULL * state_ + 1442695040888963407ULL;
    return state_;
  }

  // Uniform double in [0, 1): top 53 bits of the state.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// splitmix64, used for seed derivation and marker nonces.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

// 32 lowercase hex chars (128 bits) derived from the seed.
std::string hex_nonce128(std::uint64_t seed, int redraw);

}  // namespace promptwall
