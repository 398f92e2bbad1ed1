#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tap/core/param_store.hpp"

namespace tap::core {

struct SgdConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  std::size_t decay_every = 200;  // epochs
  double decay_factor = 0.1;
};

/// Momentum SGD with coupled weight decay and a stepwise learning-rate decay.
class SgdState {
 public:
  explicit SgdState(SgdConfig config);

  const SgdConfig& config() const noexcept { return config_; }
  // learning_rate * decay_factor ^ floor(epoch / decay_every)
  double effective_lr() const;
  double effective_lr(std::size_t epoch) const;

  std::size_t epoch = 0;
  std::size_t step_count = 0;
  std::map<std::string, std::vector<double>> velocity;

 private:
  SgdConfig config_;
};

/// v <- momentum * v + (grad + weight_decay * param); param <- param - lr * v.
/// Gradients of the updated parameters are zeroed afterwards. Throws
/// ContractError if a parameter has no gradient.
void sgd_step(ParamStore& params, SgdState& state);
void sgd_step(ParamStore& params, SgdState& state, std::span<const std::string> names);

/// Scales the gradients of every parameter whose name starts with one of
/// `prefixes` so that their joint L2 norm is at most `max_norm`. Returns the
/// norm measured before scaling. Parameters without a gradient are skipped.
double clip_global_norm(ParamStore& params, double max_norm,
                        std::span<const std::string> prefixes);

double global_grad_norm(const ParamStore& params, std::span<const std::string> prefixes);

}  // namespace tap::core
