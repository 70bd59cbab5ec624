#pragma once

#include <array>
#include <cstdint>

#include "truncest/normal.hpp"

namespace truncest {

// Purpose tags keep independent uses of the same root seed on disjoint
// streams. Values are part of the reproducibility contract: changing them
// changes every seeded output.
enum class RngPurpose : uint32_t {
  kMvnProposal = 1,
  kSurvival = 2,
  kScalarDraw = 3,
  kSgdRowPick = 4,
  kSgdModelDraw = 5,
  kDesignEntry = 6,
  kResponseDraw = 7,
  kSupportPick = 8,
  kConeDirection = 9,
  kCrnNoise = 10,
  kInit = 11,
};

namespace detail {
std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr,
                                   std::array<uint32_t, 2> key);
}

/// Counter-based generator: the value at (seed, purpose, stream, index) is a
/// pure function of those four numbers, so draws can be evaluated in any
/// order and from any thread with identical results.
class CounterRng {
 public:
  CounterRng(uint64_t seed, RngPurpose purpose, uint64_t stream)
      : seed_(seed), stream_(stream), purpose_(static_cast<uint32_t>(purpose)) {}

  uint64_t u64_at(uint64_t index) const {
    const std::array<uint32_t, 4> ctr = {
        static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32),
        static_cast<uint32_t>(stream_),
        static_cast<uint32_t>(stream_ >> 32) ^ purpose_};
    const std::array<uint32_t, 2> key = {static_cast<uint32_t>(seed_),
                                         static_cast<uint32_t>(seed_ >> 32)};
    const auto out = detail::philox4x32(ctr, key);
    return (static_cast<uint64_t>(out[0]) << 32) | out[1];
  }

  /// Uniform strictly inside (0, 1).
  double uniform_at(uint64_t index) const {
    return (static_cast<double>(u64_at(index) >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal_at(uint64_t index) const {
    return inv_norm_cdf(uniform_at(index));
  }

  uint64_t next_u64() { return u64_at(index_++); }
  double uniform() { return uniform_at(index_++); }
  double normal() { return normal_at(index_++); }

  uint64_t consumed() const { return index_; }

 private:
  uint64_t seed_;
  uint64_t stream_;
  uint32_t purpose_;
  uint64_t index_ = 0;
};

}  // namespace truncest
