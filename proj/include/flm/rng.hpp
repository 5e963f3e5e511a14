#pragma once

#include <cstdint>
#include <random>

namespace flm {

using Rng = std::mt19937_64;

// Purpose tags for seed splitting. Every random draw in a run comes from a stream
// derived from the master seed with one of these tags, so changing how one
// component consumes randomness never shifts another component's draws.
enum class Stream : std::uint64_t {
  Replication = 0x5245504cULL,  // master seed -> per-replication seed
  Demand = 0x44454d44ULL,       // replication seed -> per-station demand stream
  Synthesis = 0x53594e54ULL,    // scenario synthesis
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// derive_seed(s, tag, i) = splitmix64(splitmix64(s ^ tag) + i)
constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ static_cast<std::uint64_t>(stream)) + index);
}

inline std::uint64_t replication_seed(std::uint64_t master, int replication) {
  return derive_seed(master, Stream::Replication, static_cast<std::uint64_t>(replication));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace flm
