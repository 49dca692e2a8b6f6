#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace noisetensor {

// Counter-based randomness (Philox 4x32-10). Every draw is a pure function of
// (seed, stream, step, draw index), so trajectories can be assigned to worker
// threads in any order without changing a single bit of output. A stream is
// typically (purpose label, trajectory id); the step key is reset by the
// integrator each time step.

namespace philox {

inline constexpr std::uint32_t kW32A = 0x9E3779B9u;
inline constexpr std::uint32_t kW32B = 0xBB67AE85u;
inline constexpr std::uint32_t kM4x32A = 0xD2511F53u;
inline constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM4x32A, ctr[0], hi0, lo0);
    mulhilo(kM4x32B, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW32A;
    key[1] += kW32B;
  }
  return ctr;
}

}  // namespace philox

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t k = splitmix64(seed ^ splitmix64(stream));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  }

  // Stream id from a purpose label plus an index (trajectory, member, ...).
  // Injective in `index` for a fixed label.
  static RngStream labeled(std::uint64_t seed, std::string_view label,
                           std::uint64_t index) {
    return RngStream(seed,
                     splitmix64(fnv1a64(label) ^ (0x9E3779B97F4A7C15ull * index)));
  }

  // Positions the stream at a time step; draws restart from zero, and any
  // cached Gaussian from the previous step is discarded.
  void set_step(std::uint64_t step) {
    step_ = step;
    draw_ = 0;
    have_cached_normal_ = false;
  }

  std::uint64_t next_u64() {
    const auto out = philox::block(
        {static_cast<std::uint32_t>(step_), static_cast<std::uint32_t>(step_ >> 32),
         draw_++, 0u},
        key_);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard Gaussian via Box-Muller; the second member of each pair is
  // cached until the next set_step().
  double normal() {
    if (have_cached_normal_) {
      have_cached_normal_ = false;
      return cached_normal_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    cached_normal_ = r * std::sin(phi);
    have_cached_normal_ = true;
    return r * std::cos(phi);
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t step_ = 0;
  std::uint32_t draw_ = 0;
  double cached_normal_ = 0.0;
  bool have_cached_normal_ = false;
};

}  // namespace noisetensor
