#pragma once

// Deterministic random streams for Monte Carlo runs.
//
// One global 64-bit seed expands into any number of independent streams via a
// counter-based derivation: stream k is seeded from outputs 4k..4k+3 of the
// splitmix64 sequence started at the global seed. Every sampling site owns a
// stream id, so results are independent of shot execution order and identical
// across platforms (no std::random distributions are used; all transforms are
// spelled out here).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace dfsim {

namespace detail {

inline std::uint64_t splitmix64_next(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// xoshiro256++ with splitmix64 stream derivation.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) {
    // Stream k owns splitmix64 outputs [4k, 4k+4) of the sequence at `seed`.
    std::uint64_t sm = seed + 4 * stream * 0x9E3779B97F4A7C15ULL;
    for (auto& w : s_) w = detail::splitmix64_next(sm);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[3] = 0x9E3779B97F4A7C15ULL;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl64(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl64(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; used where log(u) must be finite.
  double uniform_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second deviate of each pair is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(t);
    have_cached_ = true;
    return r * std::cos(t);
  }

  // Poisson(lambda). Sequential inversion below lambda = 30, transformed
  // rejection (PTRS, Hormann 1993) above. Both paths depend only on this
  // stream's output sequence.
  long long poisson(double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("poisson: lambda must be >= 0");
    if (lambda == 0.0) return 0;
    if (lambda < 30.0) return poisson_inversion(lambda);
    return poisson_ptrs(lambda);
  }

  // Index into a normalized weight vector.
  std::size_t categorical(const std::vector<double>& w) {
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    return w.empty() ? 0 : w.size() - 1;
  }

 private:
  long long poisson_inversion(double lambda) {
    const double u = uniform();
    double p = std::exp(-lambda);
    double s = p;
    long long k = 0;
    while (u > s && k < 400) {
      ++k;
      p *= lambda / static_cast<double>(k);
      s += p;
    }
    return k;
  }

  long long poisson_ptrs(double lambda) {
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<long long>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      const long long k = static_cast<long long>(kf);
      const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
      const double rhs = kf * loglam - lambda - std::lgamma(kf + 1.0);
      if (lhs <= rhs) return k;
    }
  }

  std::uint64_t s_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// (seed, base) pair handed to sampling loops; shot i uses stream base + i.
struct StreamSeed {
  std::uint64_t seed = 0;
  std::uint64_t base = 0;

  Rng at(std::uint64_t offset) const { return Rng(seed, base + offset); }
  StreamSeed shifted(std::uint64_t delta) const { return {seed, base + delta}; }
};

}  // namespace dfsim
