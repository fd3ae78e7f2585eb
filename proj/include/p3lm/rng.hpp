#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace p3lm {

// Counter-based pseudo-random stream built on splitmix64. State is just
// (seed, counter), so streams are trivially serializable, and the same
// (seed, counter) pair yields the same draw on every platform. Independent
// consumers (order sampling, masking, init, dropout) each get their own
// stream via derive() so adding draws in one place never shifts another.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  // Child stream whose seed mixes in a label; counter restarts at zero.
  RngStream derive(std::string_view label) const {
    return RngStream(mix(seed_ ^ fnv1a(label)));
  }
  RngStream derive(std::uint64_t salt) const {
    return RngStream(mix(seed_ ^ mix(salt + 0x9e3779b97f4a7c15ull)));
  }

  std::uint64_t next_u64() {
    std::uint64_t x = seed_ + (++counter_) * 0x9e3779b97f4a7c15ull;
    return mix(x);
  }

  // Uniform in [0, 1): 53 mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Lemire multiply-shift rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::below: n must be > 0");
    while (true) {
      std::uint64_t x = next_u64();
      unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
      std::uint64_t lo = static_cast<std::uint64_t>(m);
      if (lo >= n || lo >= (0ull - n) % n) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  // Standard normal via Box-Muller. No caching of the second value, so the
  // draw count per call is fixed and streams stay reproducible.
  double next_normal() {
    double u1 = 0.0;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
      auto j = static_cast<std::size_t>(below(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[static_cast<std::size_t>(i)], p[j]);
    }
    return p;
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace p3lm
