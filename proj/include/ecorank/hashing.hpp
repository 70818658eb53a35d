#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ecorank {

// Stable 64-bit hashing for keyed randomness and fixture lookup. Unlike
// std::hash these values are identical across platforms and runs.

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t h = kFnvOffset) noexcept {
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

constexpr std::uint64_t fnv1a_u64(std::uint64_t v,
                                  std::uint64_t h = kFnvOffset) noexcept {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (i * 8)) & 0xFFu;
    h *= kFnvPrime;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) derived from a key.
inline double unit_interval(std::uint64_t key) noexcept {
  return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

/// Accumulates fields into a key. Strings are length-prefixed so that
/// ("ab","c") and ("a","bc") differ.
class KeyBuilder {
 public:
  explicit KeyBuilder(std::uint64_t seed = 0) : h_(fnv1a_u64(seed)) {}
  KeyBuilder& add(std::string_view s) {
    h_ = fnv1a(s, fnv1a_u64(s.size(), h_));
    return *this;
  }
  KeyBuilder& add(std::uint64_t v) {
    h_ = fnv1a_u64(v, h_);
    return *this;
  }
  std::uint64_t key() const noexcept { return h_; }

 private:
  std::uint64_t h_;
};

/// Lowercase 16-digit hex of fnv1a(text).
std::string hash_hex(std::string_view text);

}  // namespace ecorank
