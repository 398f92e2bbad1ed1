#pragma once

#include <cmath>
#include <cstddef>

#include "tap/core/tensor.hpp"
#include "tap/random.hpp"

namespace tap {

// Weight matrix [rows x cols] uniform in +-1/sqrt(cols).
inline core::Tensor uniform_fan_in(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  core::Tensor w(core::Shape{rows, cols});
  for (double& v : w.values()) v = dist(rng);
  return w;
}

}  // namespace tap
