#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace agensflow {

// Deterministic RNG with owned distribution code. std:: distributions are not
// bit-portable across standard libraries; every sampled number in this project
// must reproduce bit-identically for a given seed, so uniforms and normals are
// constructed here explicitly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1): top 53 bits scaled by 2^-53.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, cosine branch only: one normal per call, no hidden pair state.
  double normal(double mean, double stddev) {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;  // log(0) guard
    double r = std::sqrt(-2.0 * std::log(u1));
    static constexpr double kTwoPi = 6.283185307179586476925286766559;
    return mean + stddev * (r * std::cos(kTwoPi * u2));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform index in [0, n). Lemire multiply-shift; n is tiny here so the
  // sliver of bias from skipping rejection is far below anything observable.
  std::size_t pick(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // splitmix64 finalizer; used on seeds so nearby integers give unrelated streams.
  static std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2)));
  }

  static std::uint64_t hash_str(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a 64
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    return h;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace agensflow
