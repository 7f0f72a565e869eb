#pragma once

// Deterministic randomness. Every stream is an mt19937_64 seeded through a
// SplitMix64-style mixer from (master seed, stream tags), so any unit of work
// can be given its own stream and results never depend on thread schedule.

#include <cmath>
#include <cstdint>
#include <random>

namespace did {

inline constexpr double kPi = 3.14159265358979323846;

// SplitMix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  constexpr std::uint64_t gamma = 0x9e3779b97f4a7c15ull;
  std::uint64_t h = mix64(master + gamma);
  h = mix64(h ^ (a + gamma));
  h = mix64(h ^ (b + gamma));
  h = mix64(h ^ (c + gamma));
  return h;
}

// Stream tags used to derive independent substreams from one master seed.
namespace stream {
inline constexpr std::uint64_t chart = 1;
inline constexpr std::uint64_t phases = 2;
inline constexpr std::uint64_t data = 3;
inline constexpr std::uint64_t recon = 4;
inline constexpr std::uint64_t mixture = 5;
}  // namespace stream

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Box-Muller without caching the second variate: the stream position is a
  // pure function of the call count, which keeps replay trivial.
  double gaussian() {
    double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace did
