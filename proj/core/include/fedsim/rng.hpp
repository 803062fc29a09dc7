#pragma once

#include <cstdint>
#include <random>

namespace fedsim {

using Rng = std::mt19937_64;

/// Independent sub-streams of a run. A stream is identified by the run seed,
/// its tag and up to two indices (typically round and client id), so any
/// client's randomness in any round can be regenerated without replaying the
/// rounds before it.
enum class StreamTag : std::uint64_t {
  kParticipation = 1,
  kClient = 2,
  kSuite = 3,
  kPartition = 4,
  kInit = 5,
  kProbe = 6,
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                          std::uint64_t b = 0) noexcept;

inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  return Rng(derive_seed(seed, tag, a, b));
}

}  // namespace fedsim
