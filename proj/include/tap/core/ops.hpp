#pragma once

#include <cstddef>
#include <vector>

#include "tap/core/graph.hpp"

namespace tap::core {

// Every op validates operand shapes and throws DimensionError naming the op
// and the offending extents. Reductions sum in ascending index order so that
// a batched call and a per-column loop round identically.

/// y = W x + b. x is a vector [m] or a batch of columns [m x k]; the bias is
/// added to every column.
Var linear(Var x, Var weight, Var bias);
Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

Var sigmoid(Var x);
Var tanh(Var x);

inline constexpr double kNormEpsilon = 1e-12;

/// x / max(|x|, 1e-12) for a vector.
Var l2_normalize(Var x);
/// Column-wise l2_normalize of a [d x n] matrix.
Var l2_normalize_columns(Var x);

Var concat(Var x, Var y);
/// Column (i * Y.cols + j) holds concat(X[:, i], Y[:, j]).
Var pair_concat(Var x, Var y);
Var column(Var x, std::size_t index);
Var stack_columns(const std::vector<Var>& columns);
Var slice(Var x, std::size_t begin, std::size_t length);
Var reshape(Var x, Shape shape);
Var stack(const std::vector<Var>& scalars);

Var sum(Var x);
Var mean(Var x);
Var dot(Var x, Var y);
Var mean_columns(Var x);

/// -log softmax(scores)[target], computed via a max-shifted log-sum-exp.
Var cross_entropy(Var scores, std::size_t target);

// Plain helpers shared by ops and by code that runs outside a graph.
double stable_sigmoid(double x);

}  // namespace tap::core
