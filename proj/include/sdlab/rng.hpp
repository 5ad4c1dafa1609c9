#pragma once

#include <cstdint>
#include <random>

namespace sdlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named random streams. Every random draw in the library comes from
/// stream_rng(seed, stream, index), so a probe's values depend only on the
/// run seed, what the numbers are for, and the probe's own counter.
enum class Stream : std::uint64_t {
  coefficients = 1,
  controls = 2,
  initial_state = 3,
  carleman_samples = 4,
  observability_probes = 5,
  sobolev_probes = 6,
  hum_probes = 7,
  calculus_probes = 8,
  loomis_whitney = 9,
};

/// Engine seeded by splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index).
inline std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ static_cast<std::uint64_t>(stream));
  return std::mt19937_64(splitmix64(b ^ index));
}

}  // namespace sdlab
