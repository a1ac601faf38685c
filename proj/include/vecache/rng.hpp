#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace vecache {

using Rng = std::mt19937_64;

/// Independent random stream addressed by (seed, path...). Two different
/// paths never share a stream, so adding draws to one component does not
/// perturb another; this is what keeps sweep cells comparable.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Stream identifiers used by the simulator.
namespace stream {
inline constexpr std::uint64_t kArrivals = 1;
inline constexpr std::uint64_t kSpeeds = 2;
inline constexpr std::uint64_t kRequests = 3;
inline constexpr std::uint64_t kPartition = 4;
inline constexpr std::uint64_t kCodec = 5;
inline constexpr std::uint64_t kVehicleModel = 6;
inline constexpr std::uint64_t kGreedy = 7;
inline constexpr std::uint64_t kRandomCache = 8;
inline constexpr std::uint64_t kListChoice = 9;
inline constexpr std::uint64_t kSubsample = 10;
inline constexpr std::uint64_t kSynthetic = 11;
}  // namespace stream

}  // namespace vecache
