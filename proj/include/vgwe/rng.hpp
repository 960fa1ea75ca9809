#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vgwe {

// Deterministic RNG. mt19937_64 output is pinned bit-for-bit by the standard;
// the uniform mappings below avoid std::uniform_*_distribution, whose results
// are implementation-defined. Same seed => same draws on every platform.
class DetRng {
public:
  explicit DetRng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). Floor mapping keeps determinism; the bias for
  // n << 2^53 is far below anything observable.
  int uniform_int(int n) {
    int v = static_cast<int>(uniform01() * static_cast<double>(n));
    return v >= n ? n - 1 : v;
  }

  // Standard normal via Box-Muller on the deterministic uniforms.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

private:
  std::mt19937_64 eng_;
};

}  // namespace vgwe
