#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tap/core/tensor.hpp"
#include "tap/random.hpp"
#include "tap/sequence.hpp"

namespace tap::sampling {

enum class SampleMode { Train, Test };

inline constexpr std::size_t kDefaultFrames = 6;

/// T frames drawn from a RawSequence, stored as a [dim x T] tensor.
struct SampledSequence {
  core::Tensor frames;
  std::uint64_t source = 0;
  std::vector<std::size_t> indices;
};

/// Frame indices for a length-`length` sequence split into `frames` equal
/// segments [floor(i L / T), floor((i+1) L / T)).
///
/// Train mode draws one index uniformly per segment; test mode takes the
/// segment midpoint rounded down. When L < T the segments are taken on the
/// real line and the chosen position is floored and clamped to [0, L-1], so
/// indices repeat. `rng` is only used in train mode.
std::vector<std::size_t> segment_indices(std::size_t length, std::size_t frames, SampleMode mode,
                                         Rng& rng);

SampledSequence sparse_sample(const data::RawSequence& seq, std::size_t frames, SampleMode mode,
                              Rng& rng);

}  // namespace tap::sampling
