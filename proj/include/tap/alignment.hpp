#pragma once

#include <cstddef>
#include <vector>

#include "tap/core/graph.hpp"
#include "tap/core/param_store.hpp"
#include "tap/random.hpp"

namespace tap::align {

/// Dimensions of the sequence similarity module.
///
/// Message passing is a single-layer bidirectional LSTM with hidden extent
/// `hidden` per direction (context extent 2 * hidden). The alignment head
/// maps concat(x_i, y_j), extent 4 * hidden, through fully connected layers
/// of the given output widths with tanh in between and a sigmoid at the end;
/// the last width must be 1.
struct TapConfig {
  std::size_t d_f = 32;
  std::size_t hidden = 32;
  std::vector<std::size_t> head_widths{64, 32, 8, 1};

  std::size_t context_dim() const { return 2 * hidden; }
};

void validate(const TapConfig& config);

// Parameter layout:
//   alpha/{fwd,bwd}/Wx [4H x D_f], alpha/{fwd,bwd}/Wh [4H x H], alpha/{fwd,bwd}/b [4H]
//     gate rows ordered input, forget, cell, output; forget bias starts at +1
//   beta/fc<k>/W, beta/fc<k>/b for each head layer
void init_message_pass(core::ParamStore& params, const TapConfig& config, Rng& rng);
void init_align_head(core::ParamStore& params, const TapConfig& config, Rng& rng);
void init_params(core::ParamStore& params, const TapConfig& config, Rng& rng);

std::size_t head_layers(const TapConfig& config);

/// [D_f x T] -> [2H x T]. Column t is concat(forward h_t, backward h_t)
/// with zero initial hidden and cell states.
core::Var message_pass(core::Graph& g, const core::ParamStore& params, const TapConfig& config,
                       core::Var features);

/// P[i][j] = head(concat(X[:, i], Y[:, j])); all pairs go through the head
/// as one batch. Result is [T_x x T_y] with entries in (0, 1).
core::Var predict_alignment(core::Graph& g, const core::ParamStore& params,
                            const TapConfig& config, core::Var x, core::Var y);

/// S[i][j] = cosine of X[:, i] and Y[:, j] (zero columns map to zero).
core::Var similarity_matrix(core::Var x, core::Var y);

struct AlignmentVars {
  core::Var similarity;  // scalar, sum_ij P_ij S_ij
  core::Var p;
  core::Var s;
};

/// Similarity of two context sequences (already message-passed).
AlignmentVars tap_similarity_from_context(core::Graph& g, const core::ParamStore& params,
                                          const TapConfig& config, core::Var x, core::Var y);

/// Full similarity of two feature sequences: X = g(A), Y = g(B), then
/// sum_ij P_ij S_ij. Not normalized by T^2.
AlignmentVars tap_similarity(core::Graph& g, const core::ParamStore& params,
                             const TapConfig& config, core::Var a, core::Var b);

/// Cosine similarity of the temporal means of A and B.
core::Var avgpool_similarity(core::Var a, core::Var b);

/// Materialized alignment for inspection and export.
struct AlignmentPair {
  core::Tensor p;
  core::Tensor s;
  double similarity = 0.0;
};

AlignmentPair compute_alignment(const core::ParamStore& params, const TapConfig& config,
                                const core::Tensor& a, const core::Tensor& b);

}  // namespace tap::align
