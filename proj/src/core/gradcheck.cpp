#include "tap/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace tap::core {

GradCheckResult finite_diff_check(const LossBuilder& f, ParamStore& params, std::size_t n_coords,
                                  double step, std::uint64_t seed) {
  params.clear_grad();
  {
    Graph g;
    Var loss = f(g);
    g.backward(loss);
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;  // (entry, flat index)
  std::vector<std::size_t> eligible;
  std::size_t total = 0;
  const auto& entries = params.entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    if (!entries[e].tensor->requires_grad() || entries[e].tensor->numel() == 0) continue;
    eligible.push_back(e);
    total += entries[e].tensor->numel();
  }

  std::mt19937_64 rng(seed);
  for (std::size_t e : eligible) {
    std::uniform_int_distribution<std::size_t> pick(0, entries[e].tensor->numel() - 1);
    coords.emplace_back(e, pick(rng));
  }
  if (total > 0) {
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    while (coords.size() < n_coords) {
      std::size_t flat = pick(rng);
      for (std::size_t e : eligible) {
        const std::size_t n = entries[e].tensor->numel();
        if (flat < n) {
          coords.emplace_back(e, flat);
          break;
        }
        flat -= n;
      }
    }
  }

  auto evaluate = [&]() {
    Graph g;
    return f(g).item();
  };

  GradCheckResult result;
  for (const auto& [e, i] : coords) {
    Tensor& t = *entries[e].tensor;
    const double analytic = t.has_grad() ? t.grad()[i] : 0.0;
    const double saved = t[i];
    t[i] = saved + step;
    const double up = evaluate();
    t[i] = saved - step;
    const double down = evaluate();
    t[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > result.max_rel_error || result.coords_checked == 0) {
      result.max_rel_error = std::max(rel, result.max_rel_error);
      result.worst_coord = entries[e].name + "[" + std::to_string(i) + "]";
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
    ++result.coords_checked;
  }
  params.clear_grad();
  return result;
}

}  // namespace tap::core
