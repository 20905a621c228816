#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>
#include <vector>

namespace tendon {

inline constexpr double kPi = 3.14159265358979323846;

// SplitMix64 finalizer.
constexpr std::uint64_t sm64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

// FNV-1a over a byte string, used to derive per-object seeds from labels.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Independent stream key for (seed, label). Streams for distinct labels do
// not interact, so adding a consumer never shifts another consumer's draws.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  return sm64(seed ^ fnv1a64(label));
}

// Counter-based PRNG: draw i of key k is sm64(k + i*0x9E3779B97F4A7C15).
// The full algorithm is written out in README.md so other toolchains can
// reproduce every stream bit-exactly.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() {
    ++counter_;
    return sm64(key_ + counter_ * 0x9E3779B97F4A7C15ull);
  }

  // [0,1), 53-bit mantissa
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller; always consumes exactly two draws.
  double next_normal() {
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Uniform integer in [0,n) via the 128-bit multiply reduction.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Advances without generating; draw (counter + n + 1) comes next.
  void skip(std::uint64_t n) { counter_ += n; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tendon
