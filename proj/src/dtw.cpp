#include "tap/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "tap/errors.hpp"

namespace tap::dtw {
namespace {

void check_pair(const char* op, const core::Tensor& e, const core::Tensor& f) {
  if (e.rank() != 2 || f.rank() != 2) {
    throw DimensionError(std::string(op) + ": sequences must be [dim x T] matrices");
  }
  if (e.shape() != f.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + core::shape_str(e.shape()) + " and " +
                         core::shape_str(f.shape()) + " differ");
  }
  if (e.cols() == 0) throw DimensionError(std::string(op) + ": empty sequences");
}

double inner(const core::Tensor& e, std::size_t i, const core::Tensor& f, std::size_t j) {
  double acc = 0.0;
  for (std::size_t d = 0; d < e.rows(); ++d) acc += e.at(d, i) * f.at(d, j);
  return acc;
}

}  // namespace

double squared_distance(const core::Tensor& e, std::size_t i, const core::Tensor& f,
                        std::size_t j) {
  double acc = 0.0;
  for (std::size_t d = 0; d < e.rows(); ++d) {
    const double diff = e.at(d, i) - f.at(d, j);
    acc += diff * diff;
  }
  return acc;
}

double path_cost(const core::Tensor& e, const core::Tensor& f, const AlignPath& path) {
  double acc = 0.0;
  for (const auto& [i, j] : path) acc += squared_distance(e, i - 1, f, j - 1);
  return acc;
}

bool is_valid_path(const AlignPath& path, std::size_t frames) {
  if (path.empty() || path.front() != std::pair<std::size_t, std::size_t>{1, 1} ||
      path.back() != std::pair<std::size_t, std::size_t>{frames, frames}) {
    return false;
  }
  for (std::size_t k = 1; k < path.size(); ++k) {
    const auto di = path[k].first - path[k - 1].first;
    const auto dj = path[k].second - path[k - 1].second;
    if (path[k].first < path[k - 1].first || path[k].second < path[k - 1].second) return false;
    if (di > 1 || dj > 1 || (di == 0 && dj == 0)) return false;
  }
  return true;
}

DtwResult dtw(const core::Tensor& e, const core::Tensor& f) {
  check_pair("dtw", e, f);
  const std::size_t n = e.cols();
  DtwResult out;
  out.table = core::Tensor(core::Shape{n, n});
  auto& d = out.table;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double cost = squared_distance(e, i, f, j);
      if (i == 0 && j == 0) {
        d.at(i, j) = cost;
      } else if (i == 0) {
        d.at(i, j) = cost + d.at(i, j - 1);
      } else if (j == 0) {
        d.at(i, j) = cost + d.at(i - 1, j);
      } else {
        d.at(i, j) = cost + std::min({d.at(i - 1, j), d.at(i, j - 1), d.at(i - 1, j - 1)});
      }
    }
  }
  out.distance = d.at(n - 1, n - 1);

  std::size_t i = n - 1, j = n - 1;
  out.path.emplace_back(n, n);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = d.at(i - 1, j - 1);
      const double up = d.at(i - 1, j);
      const double left = d.at(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    out.path.emplace_back(i + 1, j + 1);
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

BruteForceResult brute_force_dtw(const core::Tensor& e, const core::Tensor& f) {
  check_pair("brute_force_dtw", e, f);
  const std::size_t n = e.cols();
  if (n > kBruteForceMaxFrames) {
    throw SizeError("brute_force_dtw: T = " + std::to_string(n) + " exceeds limit of " +
                    std::to_string(kBruteForceMaxFrames));
  }

  BruteForceResult out;
  out.best.distance = std::numeric_limits<double>::infinity();
  out.best.table = core::Tensor(core::Shape{n, n}, std::numeric_limits<double>::infinity());
  AlignPath current;

  // Depth-first walk over all monotone paths; the running prefix cost is
  // accumulated in path order, and each prefix end updates the table.
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j,
                                                                   double prefix) {
    const double cost = prefix + squared_distance(e, i, f, j);
    current.emplace_back(i + 1, j + 1);
    out.best.table.at(i, j) = std::min(out.best.table.at(i, j), cost);
    if (i == n - 1 && j == n - 1) {
      ++out.paths_enumerated;
      if (cost < out.best.distance) {
        out.best.distance = cost;
        out.best.path = current;
      }
    } else {
      if (i + 1 < n && j + 1 < n) walk(i + 1, j + 1, cost);
      if (i + 1 < n) walk(i + 1, j, cost);
      if (j + 1 < n) walk(i, j + 1, cost);
    }
    current.pop_back();
  };
  walk(0, 0, 0.0);
  return out;
}

UnitSimilarity dtw_similarity_unit(const core::Tensor& e, const core::Tensor& f) {
  check_pair("dtw_similarity_unit", e, f);
  for (const core::Tensor* m : {&e, &f}) {
    for (std::size_t t = 0; t < m->cols(); ++t) {
      const double norm = std::sqrt(inner(*m, t, *m, t));
      if (std::abs(norm - 1.0) > 1e-9) {
        throw ContractError("dtw_similarity_unit: column " + std::to_string(t) +
                            " has norm " + std::to_string(norm) + ", expected 1");
      }
    }
  }
  UnitSimilarity out;
  out.path = dtw(e, f).path;
  for (const auto& [i, j] : out.path) out.s_prime += inner(e, i - 1, f, j - 1);
  return out;
}

core::Tensor indicator_matrix(const AlignPath& path, std::size_t frames) {
  core::Tensor out(core::Shape{frames, frames});
  for (const auto& [i, j] : path) {
    if (i == 0 || j == 0 || i > frames || j > frames) {
      throw ContractError("indicator_matrix: pair (" + std::to_string(i) + ", " +
                          std::to_string(j) + ") outside 1.." + std::to_string(frames));
    }
    out.at(i - 1, j - 1) = 1.0;
  }
  return out;
}

}  // namespace tap::dtw
