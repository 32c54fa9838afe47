#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

namespace xgen {

// Splittable counter-style PRNG. Every consumer derives an independent
// stream from (master seed, purpose label, index), so adding or removing
// parallelism never changes the draw sequence of any other consumer.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : state_(mix(seed ^ kGolden)) {}

  static RngStream derive(uint64_t master, std::string_view label, uint64_t index = 0) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a over the label
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    uint64_t s = mix(master + kGolden);
    s = mix(s ^ h);
    s = mix(s ^ index);
    return RngStream(s);
  }

  uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Uniform integer in [0, n), n >= 1. Rejection-free modulo bias is
  // negligible at 64 bits for the cardinalities used here.
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

  // Index draw from an unnormalized nonnegative weight vector.
  size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    double acc = 0.0;
    for (size_t k = 0; k + 1 < weights.size(); ++k) {
      acc += weights[k];
      if (u < acc) return k;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

 private:
  static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  // splitmix64 finalizer
  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  uint64_t state_;
};

}  // namespace xgen
