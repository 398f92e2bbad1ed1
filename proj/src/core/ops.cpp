#include "tap/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tap/errors.hpp"

namespace tap::core {
namespace {

[[noreturn]] void dim_error(const char* op, const std::string& what) {
  throw DimensionError(std::string(op) + ": " + what);
}

void require_rank(const char* op, const char* name, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    dim_error(op, std::string(name) + " must be rank " + std::to_string(rank) + ", got " +
                      shape_str(t.shape()));
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    dim_error(op, "shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  }
}

// out[r][c] = sum_k a[r][k] * b[k][c], ascending k.
void gemm(const double* a, const double* b, double* out, std::size_t n, std::size_t m,
          std::size_t k) {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += a[r * m + i] * b[i * k + c];
      out[r * k + c] = acc;
    }
  }
}

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var linear(Var x, Var weight, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  require_rank("linear", "W", wv, 2);
  require_rank("linear", "b", bv, 1);
  if (xv.rank() != 1 && xv.rank() != 2) {
    dim_error("linear", "x must be rank 1 or 2, got " + shape_str(xv.shape()));
  }
  const std::size_t n = wv.rows();
  const std::size_t m = wv.cols();
  const std::size_t k = xv.rank() == 1 ? 1 : xv.cols();
  if (xv.extent(0) != m) {
    dim_error("linear", "W is " + shape_str(wv.shape()) + " but x has leading extent " +
                            std::to_string(xv.extent(0)));
  }
  if (bv.extent(0) != n) {
    dim_error("linear", "W is " + shape_str(wv.shape()) + " but b has extent " +
                            std::to_string(bv.extent(0)));
  }

  Tensor out(xv.rank() == 1 ? Shape{n} : Shape{n, k});
  gemm(wv.values().data(), xv.values().data(), out.values().data(), n, m, k);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) out[r * k + c] += bv[r];
  }

  Graph& g = x.graph();
  const std::size_t xi = x.id(), wi = weight.id();
  return g.record("linear", std::move(out), {x, weight, bias},
                  [&g, xi, wi, n, m, k](std::span<const double> go, const GradSlots& in) {
                    const auto xs = g.value(xi).values();
                    const auto ws = g.value(wi).values();
                    if (!in[0].empty()) {
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t c = 0; c < k; ++c) {
                          double acc = 0.0;
                          for (std::size_t r = 0; r < n; ++r) acc += ws[r * m + i] * go[r * k + c];
                          in[0][i * k + c] += acc;
                        }
                    }
                    if (!in[1].empty()) {
                      for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t i = 0; i < m; ++i) {
                          double acc = 0.0;
                          for (std::size_t c = 0; c < k; ++c) acc += go[r * k + c] * xs[i * k + c];
                          in[1][r * m + i] += acc;
                        }
                    }
                    if (!in[2].empty()) {
                      for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t c = 0; c < k; ++c) in[2][r] += go[r * k + c];
                    }
                  });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank("matmul", "a", av, 2);
  require_rank("matmul", "b", bv, 2);
  const std::size_t n = av.rows(), m = av.cols(), k = bv.cols();
  if (bv.rows() != m) {
    dim_error("matmul", "inner extents " + shape_str(av.shape()) + " and " +
                            shape_str(bv.shape()) + " do not conform");
  }
  Tensor out(Shape{n, k});
  gemm(av.values().data(), bv.values().data(), out.values().data(), n, m, k);

  Graph& g = a.graph();
  const std::size_t ai = a.id(), bi = b.id();
  return g.record("matmul", std::move(out), {a, b},
                  [&g, ai, bi, n, m, k](std::span<const double> go, const GradSlots& in) {
                    const auto as = g.value(ai).values();
                    const auto bs = g.value(bi).values();
                    if (!in[0].empty()) {
                      for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t i = 0; i < m; ++i) {
                          double acc = 0.0;
                          for (std::size_t c = 0; c < k; ++c) acc += go[r * k + c] * bs[i * k + c];
                          in[0][r * m + i] += acc;
                        }
                    }
                    if (!in[1].empty()) {
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t c = 0; c < k; ++c) {
                          double acc = 0.0;
                          for (std::size_t r = 0; r < n; ++r) acc += as[r * m + i] * go[r * k + c];
                          in[1][i * k + c] += acc;
                        }
                    }
                  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_rank("transpose", "a", av, 2);
  const std::size_t n = av.rows(), m = av.cols();
  Tensor out(Shape{m, n});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out.at(c, r) = av.at(r, c);
  return a.graph().record("transpose", std::move(out), {a},
                          [n, m](std::span<const double> go, const GradSlots& in) {
                            for (std::size_t r = 0; r < n; ++r)
                              for (std::size_t c = 0; c < m; ++c) in[0][r * m + c] += go[c * n + r];
                          });
}

namespace {

template <class Fwd>
Var binary_elementwise(const char* op, Var a, Var b, Fwd fwd, bool is_mul, double sign_b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(op, av, bv);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = fwd(av[i], bv[i]);
  Graph& g = a.graph();
  const std::size_t ai = a.id(), bi = b.id();
  return g.record(op, std::move(out), {a, b},
                  [&g, ai, bi, is_mul, sign_b](std::span<const double> go, const GradSlots& in) {
                    const auto as = g.value(ai).values();
                    const auto bs = g.value(bi).values();
                    for (std::size_t i = 0; i < go.size(); ++i) {
                      if (!in[0].empty()) in[0][i] += is_mul ? go[i] * bs[i] : go[i];
                      if (!in[1].empty()) in[1][i] += is_mul ? go[i] * as[i] : sign_b * go[i];
                    }
                  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_elementwise("add", a, b, [](double x, double y) { return x + y; }, false, 1.0);
}

Var sub(Var a, Var b) {
  return binary_elementwise("sub", a, b, [](double x, double y) { return x - y; }, false, -1.0);
}

Var mul(Var a, Var b) {
  return binary_elementwise("mul", a, b, [](double x, double y) { return x * y; }, true, 0.0);
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  out.clear_grad();
  for (double& v : out.values()) v *= factor;
  return a.graph().record("scale", std::move(out), {a},
                          [factor](std::span<const double> go, const GradSlots& in) {
                            for (std::size_t i = 0; i < go.size(); ++i) in[0][i] += factor * go[i];
                          });
}

Var sigmoid(Var x) {
  Tensor out(x.value().shape());
  const auto xs = x.value().values();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = stable_sigmoid(xs[i]);
  Graph& g = x.graph();
  const std::size_t yi = g.size();
  return g.record("sigmoid", std::move(out), {x},
                  [&g, yi](std::span<const double> go, const GradSlots& in) {
                    const auto ys = g.value(yi).values();
                    for (std::size_t i = 0; i < go.size(); ++i)
                      in[0][i] += go[i] * ys[i] * (1.0 - ys[i]);
                  });
}

Var tanh(Var x) {
  Tensor out(x.value().shape());
  const auto xs = x.value().values();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(xs[i]);
  Graph& g = x.graph();
  const std::size_t yi = g.size();
  return g.record("tanh", std::move(out), {x},
                  [&g, yi](std::span<const double> go, const GradSlots& in) {
                    const auto ys = g.value(yi).values();
                    for (std::size_t i = 0; i < go.size(); ++i)
                      in[0][i] += go[i] * (1.0 - ys[i] * ys[i]);
                  });
}

namespace {

// Normalizes `count` vectors of length `dim` laid out with the given strides.
Var normalize_impl(const char* op, Var x, std::size_t dim, std::size_t count,
                   std::size_t elem_stride, std::size_t vec_stride) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  std::vector<double> norms(count);
  for (std::size_t v = 0; v < count; ++v) {
    double ss = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double e = xv[v * vec_stride + d * elem_stride];
      ss += e * e;
    }
    const double denom = std::max(std::sqrt(ss), kNormEpsilon);
    norms[v] = denom;
    for (std::size_t d = 0; d < dim; ++d) {
      const std::size_t at = v * vec_stride + d * elem_stride;
      out[at] = xv[at] / denom;
    }
  }
  Graph& g = x.graph();
  const std::size_t yi = g.size();
  return g.record(op, std::move(out), {x},
                  [&g, yi, norms = std::move(norms), dim, count, elem_stride, vec_stride](
                      std::span<const double> go, const GradSlots& in) {
                    const auto ys = g.value(yi).values();
                    for (std::size_t v = 0; v < count; ++v) {
                      const bool clamped = norms[v] <= kNormEpsilon;
                      double yg = 0.0;
                      if (!clamped) {
                        for (std::size_t d = 0; d < dim; ++d) {
                          const std::size_t at = v * vec_stride + d * elem_stride;
                          yg += ys[at] * go[at];
                        }
                      }
                      for (std::size_t d = 0; d < dim; ++d) {
                        const std::size_t at = v * vec_stride + d * elem_stride;
                        in[0][at] += (go[at] - ys[at] * yg) / norms[v];
                      }
                    }
                  });
}

}  // namespace

Var l2_normalize(Var x) {
  const Tensor& xv = x.value();
  require_rank("l2_normalize", "x", xv, 1);
  return normalize_impl("l2_normalize", x, xv.numel(), 1, 1, xv.numel());
}

Var l2_normalize_columns(Var x) {
  const Tensor& xv = x.value();
  require_rank("l2_normalize_columns", "x", xv, 2);
  return normalize_impl("l2_normalize_columns", x, xv.rows(), xv.cols(), xv.cols(), 1);
}

Var concat(Var x, Var y) {
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  require_rank("concat", "x", xv, 1);
  require_rank("concat", "y", yv, 1);
  const std::size_t a = xv.numel(), b = yv.numel();
  Tensor out(Shape{a + b});
  std::copy(xv.values().begin(), xv.values().end(), out.values().begin());
  std::copy(yv.values().begin(), yv.values().end(), out.values().begin() + a);
  return x.graph().record("concat", std::move(out), {x, y},
                          [a, b](std::span<const double> go, const GradSlots& in) {
                            if (!in[0].empty())
                              for (std::size_t i = 0; i < a; ++i) in[0][i] += go[i];
                            if (!in[1].empty())
                              for (std::size_t i = 0; i < b; ++i) in[1][i] += go[a + i];
                          });
}

Var pair_concat(Var x, Var y) {
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  require_rank("pair_concat", "x", xv, 2);
  require_rank("pair_concat", "y", yv, 2);
  const std::size_t dx = xv.rows(), tx = xv.cols(), dy = yv.rows(), ty = yv.cols();
  const std::size_t cols = tx * ty;
  Tensor out(Shape{dx + dy, cols});
  for (std::size_t i = 0; i < tx; ++i) {
    for (std::size_t j = 0; j < ty; ++j) {
      const std::size_t c = i * ty + j;
      for (std::size_t d = 0; d < dx; ++d) out.at(d, c) = xv.at(d, i);
      for (std::size_t d = 0; d < dy; ++d) out.at(dx + d, c) = yv.at(d, j);
    }
  }
  return x.graph().record(
      "pair_concat", std::move(out), {x, y},
      [dx, tx, dy, ty, cols](std::span<const double> go, const GradSlots& in) {
        for (std::size_t i = 0; i < tx; ++i) {
          for (std::size_t j = 0; j < ty; ++j) {
            const std::size_t c = i * ty + j;
            if (!in[0].empty())
              for (std::size_t d = 0; d < dx; ++d) in[0][d * tx + i] += go[d * cols + c];
            if (!in[1].empty())
              for (std::size_t d = 0; d < dy; ++d) in[1][d * ty + j] += go[(dx + d) * cols + c];
          }
        }
      });
}

Var column(Var x, std::size_t index) {
  const Tensor& xv = x.value();
  require_rank("column", "x", xv, 2);
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (index >= cols) {
    dim_error("column", "index " + std::to_string(index) + " out of range for " +
                            shape_str(xv.shape()));
  }
  Tensor out(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) out[r] = xv.at(r, index);
  return x.graph().record("column", std::move(out), {x},
                          [rows, cols, index](std::span<const double> go, const GradSlots& in) {
                            for (std::size_t r = 0; r < rows; ++r) in[0][r * cols + index] += go[r];
                          });
}

Var stack_columns(const std::vector<Var>& columns) {
  if (columns.empty()) dim_error("stack_columns", "no columns given");
  const std::size_t rows = columns.front().value().numel();
  const std::size_t cols = columns.size();
  Tensor out(Shape{rows, cols});
  for (std::size_t c = 0; c < cols; ++c) {
    const Tensor& v = columns[c].value();
    require_rank("stack_columns", "column", v, 1);
    if (v.numel() != rows) {
      dim_error("stack_columns", "column " + std::to_string(c) + " has extent " +
                                     std::to_string(v.numel()) + ", expected " +
                                     std::to_string(rows));
    }
    for (std::size_t r = 0; r < rows; ++r) out.at(r, c) = v[r];
  }
  return columns.front().graph().record(
      "stack_columns", std::move(out), columns,
      [rows, cols](std::span<const double> go, const GradSlots& in) {
        for (std::size_t c = 0; c < cols; ++c) {
          if (in[c].empty()) continue;
          for (std::size_t r = 0; r < rows; ++r) in[c][r] += go[r * cols + c];
        }
      });
}

Var slice(Var x, std::size_t begin, std::size_t length) {
  const Tensor& xv = x.value();
  require_rank("slice", "x", xv, 1);
  if (begin + length > xv.numel()) {
    dim_error("slice", "range [" + std::to_string(begin) + ", " + std::to_string(begin + length) +
                           ") exceeds extent " + std::to_string(xv.numel()));
  }
  Tensor out(Shape{length});
  std::copy_n(xv.values().begin() + static_cast<std::ptrdiff_t>(begin), length,
              out.values().begin());
  return x.graph().record("slice", std::move(out), {x},
                          [begin](std::span<const double> go, const GradSlots& in) {
                            for (std::size_t i = 0; i < go.size(); ++i) in[0][begin + i] += go[i];
                          });
}

Var reshape(Var x, Shape shape) {
  const Tensor& xv = x.value();
  if (shape_numel(shape) != xv.numel()) {
    dim_error("reshape", "cannot view " + shape_str(xv.shape()) + " as " + shape_str(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(xv.values().begin(), xv.values().end()));
  return x.graph().record("reshape", std::move(out), {x},
                          [](std::span<const double> go, const GradSlots& in) {
                            for (std::size_t i = 0; i < go.size(); ++i) in[0][i] += go[i];
                          });
}

Var stack(const std::vector<Var>& scalars) {
  if (scalars.empty()) dim_error("stack", "no values given");
  Tensor out(Shape{scalars.size()});
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    const Tensor& v = scalars[i].value();
    if (v.numel() != 1) dim_error("stack", "element " + std::to_string(i) + " is not scalar");
    out[i] = v[0];
  }
  return scalars.front().graph().record("stack", std::move(out), scalars,
                                        [](std::span<const double> go, const GradSlots& in) {
                                          for (std::size_t i = 0; i < go.size(); ++i)
                                            if (!in[i].empty()) in[i][0] += go[i];
                                        });
}

Var sum(Var x) {
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  return x.graph().record("sum", Tensor::scalar(acc), {x},
                          [](std::span<const double> go, const GradSlots& in) {
                            for (double& g : in[0]) g += go[0];
                          });
}

Var mean(Var x) {
  const std::size_t n = x.value().numel();
  if (n == 0) dim_error("mean", "empty input");
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  const double inv = 1.0 / static_cast<double>(n);
  return x.graph().record("mean", Tensor::scalar(acc / static_cast<double>(n)), {x},
                          [inv](std::span<const double> go, const GradSlots& in) {
                            for (double& g : in[0]) g += go[0] * inv;
                          });
}

Var dot(Var x, Var y) {
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  require_same_shape("dot", xv, yv);
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.numel(); ++i) acc += xv[i] * yv[i];
  Graph& g = x.graph();
  const std::size_t xi = x.id(), yi = y.id();
  return g.record("dot", Tensor::scalar(acc), {x, y},
                  [&g, xi, yi](std::span<const double> go, const GradSlots& in) {
                    const auto xs = g.value(xi).values();
                    const auto ys = g.value(yi).values();
                    for (std::size_t i = 0; i < xs.size(); ++i) {
                      if (!in[0].empty()) in[0][i] += go[0] * ys[i];
                      if (!in[1].empty()) in[1][i] += go[0] * xs[i];
                    }
                  });
}

Var mean_columns(Var x) {
  const Tensor& xv = x.value();
  require_rank("mean_columns", "x", xv, 2);
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (cols == 0) dim_error("mean_columns", "no columns");
  Tensor out(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += xv.at(r, c);
    out[r] = acc / static_cast<double>(cols);
  }
  const double inv = 1.0 / static_cast<double>(cols);
  return x.graph().record("mean_columns", std::move(out), {x},
                          [rows, cols, inv](std::span<const double> go, const GradSlots& in) {
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t c = 0; c < cols; ++c) in[0][r * cols + c] += go[r] * inv;
                          });
}

Var cross_entropy(Var scores, std::size_t target) {
  const Tensor& sv = scores.value();
  require_rank("cross_entropy", "scores", sv, 1);
  const std::size_t n = sv.numel();
  if (target >= n) {
    dim_error("cross_entropy", "target " + std::to_string(target) + " out of range for " +
                                   std::to_string(n) + " classes");
  }
  const double top = *std::max_element(sv.values().begin(), sv.values().end());
  double z = 0.0;
  for (double s : sv.values()) z += std::exp(s - top);
  const double lse = top + std::log(z);
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) probs[i] = std::exp(sv[i] - lse);
  return scores.graph().record(
      "cross_entropy", Tensor::scalar(lse - sv[target]), {scores},
      [probs = std::move(probs), target](std::span<const double> go, const GradSlots& in) {
        for (std::size_t i = 0; i < probs.size(); ++i) {
          in[0][i] += go[0] * (probs[i] - (i == target ? 1.0 : 0.0));
        }
      });
}

}  // namespace tap::core
