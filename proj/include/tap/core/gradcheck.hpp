#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "tap/core/graph.hpp"
#include "tap/core/param_store.hpp"

namespace tap::core {

/// Builds a scalar loss from the parameters in a store. Must be
/// deterministic: any randomness has to be re-seeded on every call.
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_coord;  // "name[index]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares backward() against central differences (f(p+h) - f(p-h)) / 2h.
///
/// Every parameter with requires_grad gets at least one coordinate; the rest
/// of the `n_coords` budget is drawn uniformly over all coordinates. The
/// relative error uses max(|analytic|, |numeric|, 1e-12) as denominator.
/// Parameter values are restored and gradients cleared on return.
GradCheckResult finite_diff_check(const LossBuilder& f, ParamStore& params, std::size_t n_coords,
                                  double step, std::uint64_t seed);

}  // namespace tap::core
