#include "tap/encoder.hpp"

#include <string>

#include "tap/core/ops.hpp"
#include "tap/errors.hpp"
#include "tap/init.hpp"

namespace tap::encoder {
namespace {

std::vector<std::size_t> layer_widths(const EncoderConfig& config) {
  std::vector<std::size_t> widths{config.d_raw};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(config.d_f);
  return widths;
}

std::string layer_name(std::size_t k, const char* what) {
  return "theta/fc" + std::to_string(k + 1) + "/" + what;
}

}  // namespace

void init_params(core::ParamStore& params, const EncoderConfig& config, Rng& rng) {
  const auto widths = layer_widths(config);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    params.add(layer_name(k, "W"), uniform_fan_in(widths[k + 1], widths[k], rng));
    params.add(layer_name(k, "b"), core::Tensor(core::Shape{widths[k + 1]}));
  }
}

core::Var encode(core::Graph& g, const core::ParamStore& params, const EncoderConfig& config,
                 core::Var frames) {
  const auto& shape = frames.shape();
  if (shape.size() != 2 || shape[0] != config.d_raw) {
    throw DimensionError("encode: expected [" + std::to_string(config.d_raw) +
                         " x T] frames, got " + core::shape_str(shape));
  }
  const std::size_t layers = layer_widths(config).size() - 1;
  core::Var h = frames;
  for (std::size_t k = 0; k < layers; ++k) {
    h = core::linear(h, g.param(params, layer_name(k, "W")), g.param(params, layer_name(k, "b")));
    if (k + 1 < layers) h = core::tanh(h);
  }
  return h;
}

core::Var encode(core::Graph& g, const core::ParamStore& params, const EncoderConfig& config,
                 const sampling::SampledSequence& seq) {
  return encode(g, params, config, g.constant(seq.frames));
}

core::Tensor encode(const core::ParamStore& params, const EncoderConfig& config,
                    const sampling::SampledSequence& seq) {
  core::Graph g;
  return encode(g, params, config, seq).value();
}

}  // namespace tap::encoder
