#pragma once

#include <cstdint>
#include <random>

namespace hybridscreen {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `stream` under `parent`. All randomness in the
/// library flows from seeds derived this way, never from scheduling order,
/// so parallel and serial runs see identical streams.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) noexcept {
  return mix64(parent ^ mix64(stream ^ 0xD1B54A32D192ED03ULL));
}

template <typename... Streams>
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream,
                                    Streams... rest) noexcept {
  return derive_seed(derive_seed(parent, stream), static_cast<std::uint64_t>(rest)...);
}

// Stream tags used across modules.
namespace stream {
inline constexpr std::uint64_t kFolds = 1;
inline constexpr std::uint64_t kUpsample = 2;
inline constexpr std::uint64_t kForest = 3;
inline constexpr std::uint64_t kNetwork = 4;
inline constexpr std::uint64_t kRandomSearch = 5;
inline constexpr std::uint64_t kEnsembleMember = 6;
inline constexpr std::uint64_t kSplit = 7;
}  // namespace stream

}  // namespace hybridscreen
