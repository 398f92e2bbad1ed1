#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "tap/core/tensor.hpp"

namespace tap::dtw {

/// Ordered 1-based index pairs (i, j) from (1, 1) to (T, T); each step is
/// one of (+1, 0), (0, +1), (+1, +1).
using AlignPath = std::vector<std::pair<std::size_t, std::size_t>>;

struct DtwResult {
  double distance = 0.0;
  AlignPath path;
  core::Tensor table;  // [T x T] cumulative costs
};

struct BruteForceResult {
  DtwResult best;
  std::size_t paths_enumerated = 0;
};

inline constexpr std::size_t kBruteForceMaxFrames = 8;

// Sequences are [dim x T] matrices; column t is frame t.

double squared_distance(const core::Tensor& e, std::size_t i, const core::Tensor& f, std::size_t j);
double path_cost(const core::Tensor& e, const core::Tensor& f, const AlignPath& path);
bool is_valid_path(const AlignPath& path, std::size_t frames);

/// Classical DTW by dynamic programming with cumulative first row/column.
/// Backtracking prefers diagonal, then (i-1, j), then (i, j-1).
DtwResult dtw(const core::Tensor& e, const core::Tensor& f);

/// Enumerates every monotone path; limited to T <= 8.
BruteForceResult brute_force_dtw(const core::Tensor& e, const core::Tensor& f);

struct UnitSimilarity {
  double s_prime = 0.0;
  AlignPath path;
};

/// Inner-product sum along the optimal DTW path. All columns must have unit
/// norm (within 1e-9); then distance = 2 |path| - 2 s_prime.
UnitSimilarity dtw_similarity_unit(const core::Tensor& e, const core::Tensor& f);

/// [T x T] 0/1 matrix marking the pairs on `path`.
core::Tensor indicator_matrix(const AlignPath& path, std::size_t frames);

}  // namespace tap::dtw
