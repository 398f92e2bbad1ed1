#include "tap/alignment.hpp"

#include <string>

#include "tap/core/ops.hpp"
#include "tap/errors.hpp"
#include "tap/init.hpp"

namespace tap::align {
namespace {

using core::Var;

const char* const kDirections[] = {"fwd", "bwd"};

std::string lstm_name(const char* dir, const char* what) {
  return std::string("alpha/") + dir + "/" + what;
}

std::string head_name(std::size_t k, const char* what) {
  return "beta/fc" + std::to_string(k + 1) + "/" + what;
}

struct LstmStep {
  Var h;
  Var c;
};

// One direction over the precomputed input projections (columns of `gx`).
std::vector<Var> run_direction(core::Graph& g, const core::ParamStore& params, const char* dir,
                               std::size_t hidden, Var gx, bool reverse) {
  const std::size_t frames = gx.shape()[1];
  const Var wh = g.param(params, lstm_name(dir, "Wh"));
  const Var no_bias = g.constant(core::Tensor(core::Shape{4 * hidden}));
  std::vector<Var> outputs(frames);
  LstmStep state;
  for (std::size_t step = 0; step < frames; ++step) {
    const std::size_t t = reverse ? frames - 1 - step : step;
    Var gates = core::column(gx, t);
    if (step > 0) gates = core::add(gates, core::linear(state.h, wh, no_bias));
    const Var in_gate = core::sigmoid(core::slice(gates, 0, hidden));
    const Var forget = core::sigmoid(core::slice(gates, hidden, hidden));
    const Var cell = core::tanh(core::slice(gates, 2 * hidden, hidden));
    const Var out_gate = core::sigmoid(core::slice(gates, 3 * hidden, hidden));
    Var c = core::mul(in_gate, cell);
    if (step > 0) c = core::add(core::mul(forget, state.c), c);
    state.c = c;
    state.h = core::mul(out_gate, core::tanh(c));
    outputs[t] = state.h;
  }
  return outputs;
}

}  // namespace

void validate(const TapConfig& config) {
  if (config.d_f == 0 || config.hidden == 0) {
    throw ContractError("tap: feature and hidden extents must be positive");
  }
  if (config.head_widths.empty() || config.head_widths.back() != 1) {
    throw ContractError("tap: alignment head must end in a width-1 layer");
  }
  for (std::size_t w : config.head_widths) {
    if (w == 0) throw ContractError("tap: alignment head widths must be positive");
  }
}

std::size_t head_layers(const TapConfig& config) { return config.head_widths.size(); }

void init_message_pass(core::ParamStore& params, const TapConfig& config, Rng& rng) {
  validate(config);
  const std::size_t h = config.hidden;
  for (const char* dir : kDirections) {
    params.add(lstm_name(dir, "Wx"), uniform_fan_in(4 * h, config.d_f, rng));
    params.add(lstm_name(dir, "Wh"), uniform_fan_in(4 * h, h, rng));
    core::Tensor bias(core::Shape{4 * h});
    for (std::size_t i = h; i < 2 * h; ++i) bias[i] = 1.0;
    params.add(lstm_name(dir, "b"), std::move(bias));
  }
}

void init_align_head(core::ParamStore& params, const TapConfig& config, Rng& rng) {
  validate(config);
  std::size_t fan_in = 2 * config.context_dim();
  for (std::size_t k = 0; k < config.head_widths.size(); ++k) {
    const std::size_t width = config.head_widths[k];
    params.add(head_name(k, "W"), uniform_fan_in(width, fan_in, rng));
    params.add(head_name(k, "b"), core::Tensor(core::Shape{width}));
    fan_in = width;
  }
}

void init_params(core::ParamStore& params, const TapConfig& config, Rng& rng) {
  init_message_pass(params, config, rng);
  init_align_head(params, config, rng);
}

Var message_pass(core::Graph& g, const core::ParamStore& params, const TapConfig& config,
                 Var features) {
  const auto& shape = features.shape();
  if (shape.size() != 2 || shape[0] != config.d_f || shape[1] == 0) {
    throw DimensionError("message_pass: expected [" + std::to_string(config.d_f) +
                         " x T] features with T >= 1, got " + core::shape_str(shape));
  }
  std::vector<Var> halves[2];
  for (int d = 0; d < 2; ++d) {
    const char* dir = kDirections[d];
    const Var gx = core::linear(features, g.param(params, lstm_name(dir, "Wx")),
                                g.param(params, lstm_name(dir, "b")));
    halves[d] = run_direction(g, params, dir, config.hidden, gx, d == 1);
  }
  std::vector<Var> columns;
  columns.reserve(shape[1]);
  for (std::size_t t = 0; t < shape[1]; ++t) {
    columns.push_back(core::concat(halves[0][t], halves[1][t]));
  }
  return core::stack_columns(columns);
}

Var predict_alignment(core::Graph& g, const core::ParamStore& params, const TapConfig& config,
                      Var x, Var y) {
  const auto& xs = x.shape();
  const auto& ys = y.shape();
  if (xs.size() != 2 || ys.size() != 2 || xs[0] != config.context_dim() ||
      ys[0] != config.context_dim()) {
    throw DimensionError("predict_alignment: context shapes " + core::shape_str(xs) + " and " +
                         core::shape_str(ys) + " do not match extent " +
                         std::to_string(config.context_dim()));
  }
  Var h = core::pair_concat(x, y);
  const std::size_t layers = head_layers(config);
  for (std::size_t k = 0; k < layers; ++k) {
    h = core::linear(h, g.param(params, head_name(k, "W")), g.param(params, head_name(k, "b")));
    h = k + 1 < layers ? core::tanh(h) : core::sigmoid(h);
  }
  return core::reshape(h, core::Shape{xs[1], ys[1]});
}

Var similarity_matrix(Var x, Var y) {
  const auto& xs = x.shape();
  const auto& ys = y.shape();
  if (xs.size() != 2 || ys.size() != 2 || xs[0] != ys[0]) {
    throw DimensionError("similarity_matrix: shapes " + core::shape_str(xs) + " and " +
                         core::shape_str(ys) + " do not share a column extent");
  }
  return core::matmul(core::transpose(core::l2_normalize_columns(x)),
                      core::l2_normalize_columns(y));
}

AlignmentVars tap_similarity_from_context(core::Graph& g, const core::ParamStore& params,
                                          const TapConfig& config, Var x, Var y) {
  AlignmentVars out;
  out.p = predict_alignment(g, params, config, x, y);
  out.s = similarity_matrix(x, y);
  out.similarity = core::sum(core::mul(out.p, out.s));
  return out;
}

AlignmentVars tap_similarity(core::Graph& g, const core::ParamStore& params,
                             const TapConfig& config, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("tap_similarity: shapes " + core::shape_str(a.shape()) + " and " +
                         core::shape_str(b.shape()) + " differ");
  }
  const Var x = message_pass(g, params, config, a);
  const Var y = message_pass(g, params, config, b);
  return tap_similarity_from_context(g, params, config, x, y);
}

Var avgpool_similarity(Var a, Var b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[0] != bs[0]) {
    throw DimensionError("avgpool_similarity: shapes " + core::shape_str(as) + " and " +
                         core::shape_str(bs) + " do not share a feature extent");
  }
  return core::dot(core::l2_normalize(core::mean_columns(a)),
                   core::l2_normalize(core::mean_columns(b)));
}

AlignmentPair compute_alignment(const core::ParamStore& params, const TapConfig& config,
                                const core::Tensor& a, const core::Tensor& b) {
  core::Graph g;
  const auto vars = tap_similarity(g, params, config, g.constant(a), g.constant(b));
  return {vars.p.value(), vars.s.value(), vars.similarity.item()};
}

}  // namespace tap::align
