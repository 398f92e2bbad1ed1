#pragma once

#include <cstddef>
#include <vector>

#include "tap/core/graph.hpp"
#include "tap/core/param_store.hpp"
#include "tap/random.hpp"
#include "tap/sampler.hpp"

namespace tap::encoder {

/// Per-frame MLP: d_raw -> hidden... -> d_f with tanh between layers and a
/// linear output. Parameters live under "theta/fc<k>/{W,b}".
struct EncoderConfig {
  std::size_t d_raw = 16;
  std::vector<std::size_t> hidden{64};
  std::size_t d_f = 32;
};

void init_params(core::ParamStore& params, const EncoderConfig& config, Rng& rng);

/// Encodes every column of a [d_raw x T] matrix independently; returns the
/// [d_f x T] feature sequence.
core::Var encode(core::Graph& g, const core::ParamStore& params, const EncoderConfig& config,
                 core::Var frames);
core::Var encode(core::Graph& g, const core::ParamStore& params, const EncoderConfig& config,
                 const sampling::SampledSequence& seq);

/// Graph-free convenience returning the feature matrix.
core::Tensor encode(const core::ParamStore& params, const EncoderConfig& config,
                    const sampling::SampledSequence& seq);

}  // namespace tap::encoder
