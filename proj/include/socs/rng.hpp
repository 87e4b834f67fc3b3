#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace socs {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Counter-based generator: the n-th draw is a pure function of (key, n).
/// Streams are derived from (seed, index, tag) so independent subsystems
/// never share state and generation order does not matter.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key = 0) : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t index, std::string_view tag)
      : key_(mix64(mix64(seed) ^ mix64(index + 0x632BE59BD9B4E019ull) ^ fnv1a64(tag))) {}

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  /// Sub-stream keyed on this stream's key.
  CounterRng fork(std::string_view tag, std::uint64_t index = 0) const {
    return CounterRng(key_, index, tag);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> random_permutation(std::size_t n, CounterRng& rng);

}  // namespace socs
