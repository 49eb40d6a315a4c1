#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pfp {

/// splitmix64 finaliser.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent generator for a (master seed, key...) tuple. Streams keyed by
/// different tuples do not depend on the order in which they are created.
inline std::mt19937_64 make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632BE59BD9B4E019ULL));
  return std::mt19937_64(h);
}

/// Purposes used as the second key of simulation streams.
enum class StreamPurpose : std::uint64_t { Operator = 1, Innovations = 2, Noise = 3, Bootstrap = 4, Trial = 5 };

inline std::uint64_t key(StreamPurpose p) { return static_cast<std::uint64_t>(p); }

}  // namespace pfp
