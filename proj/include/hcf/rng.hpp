// Deterministic PRNG (xoshiro256++) with explicit uniform/normal draws.
// std:: distributions are implementation-defined; experiment reproducibility
// requires the exact draw sequence to be pinned by this code.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "hcf/common.hpp"

namespace hcf {

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) {
    // splitmix64 expansion of the seed into state
    uint64_t x = seed;
    for (auto& si : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      si = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0,1)
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi_inclusive - lo + 1));
  }

  // standard normal via Box-Muller (cached second value)
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(2.0 * kPi * u2);
    have_cached_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  cplx cnormal() { double re = normal(); double im = normal(); return cplx(re, im); }

  Mat complex_gaussian(int rows, int cols) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = cnormal();
    return m;
  }

  Vec complex_gaussian_vec(int len) {
    Vec v(len);
    for (int i = 0; i < len; ++i) v(i) = cnormal();
    return v;
  }

  // derive an independent stream (for per-sample determinism)
  Rng fork(uint64_t salt) const {
    Rng r;
    r.s_ = s_;
    Rng mix(salt ^ 0xd1342543de82ef95ULL);
    for (int i = 0; i < 4; ++i) r.s_[i] ^= mix.next_u64();
    r.next_u64();
    return r;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<uint64_t, 4> s_{};
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace hcf
