#include "tap/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "tap/errors.hpp"

namespace tap::sampling {

std::vector<std::size_t> segment_indices(std::size_t length, std::size_t frames, SampleMode mode,
                                         Rng& rng) {
  if (frames == 0) throw ContractError("sparse_sample: T must be at least 1");
  if (length == 0) throw ContractError("sparse_sample: sequence is empty");

  std::vector<std::size_t> out(frames);
  if (length >= frames) {
    for (std::size_t i = 0; i < frames; ++i) {
      const std::size_t lo = i * length / frames;
      const std::size_t hi = (i + 1) * length / frames;
      if (mode == SampleMode::Test) {
        out[i] = (lo + hi) / 2;
      } else {
        std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
        out[i] = pick(rng);
      }
    }
    return out;
  }

  const double seg = static_cast<double>(length) / static_cast<double>(frames);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < frames; ++i) {
    const double offset = mode == SampleMode::Test ? 0.5 : unit(rng);
    const double pos = (static_cast<double>(i) + offset) * seg;
    const auto idx = static_cast<std::size_t>(std::floor(pos));
    out[i] = std::min(idx, length - 1);
  }
  return out;
}

SampledSequence sparse_sample(const data::RawSequence& seq, std::size_t frames, SampleMode mode,
                              Rng& rng) {
  SampledSequence out;
  out.indices = segment_indices(seq.length, frames, mode, rng);
  out.source = seq.instance_id;
  out.frames = core::Tensor(core::Shape{seq.dim, frames});
  for (std::size_t t = 0; t < frames; ++t) {
    const auto src = seq.frame(out.indices[t]);
    for (std::size_t d = 0; d < seq.dim; ++d) out.frames.at(d, t) = src[d];
  }
  return out;
}

}  // namespace tap::sampling
