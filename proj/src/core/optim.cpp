#include "tap/core/optim.hpp"

#include <cmath>
#include <string_view>

#include "tap/errors.hpp"

namespace tap::core {
namespace {

bool has_prefix(std::string_view name, std::span<const std::string> prefixes) {
  for (const auto& p : prefixes) {
    if (name.substr(0, p.size()) == p) return true;
  }
  return false;
}

// Relative slack so that a second clip of already-clipped gradients is a no-op.
constexpr double kClipSlack = 1e-12;

}  // namespace

SgdState::SgdState(SgdConfig config) : config_(config) {
  if (!(config_.learning_rate >= 0.0)) throw ContractError("sgd: learning rate must be >= 0");
  if (!(config_.momentum >= 0.0 && config_.momentum < 1.0))
    throw ContractError("sgd: momentum must lie in [0, 1)");
  if (!(config_.weight_decay >= 0.0)) throw ContractError("sgd: weight decay must be >= 0");
  if (config_.decay_every == 0) throw ContractError("sgd: decay_every must be positive");
  if (!(config_.decay_factor > 0.0)) throw ContractError("sgd: decay factor must be positive");
}

double SgdState::effective_lr() const { return effective_lr(epoch); }

double SgdState::effective_lr(std::size_t at_epoch) const {
  const auto drops = static_cast<double>(at_epoch / config_.decay_every);
  return config_.learning_rate * std::pow(config_.decay_factor, drops);
}

void sgd_step(ParamStore& params, SgdState& state) {
  const auto names = params.names();
  sgd_step(params, state, names);
}

void sgd_step(ParamStore& params, SgdState& state, std::span<const std::string> names) {
  const double lr = state.effective_lr();
  const double mu = state.config().momentum;
  const double wd = state.config().weight_decay;
  for (const auto& name : names) {
    Tensor& p = params.at(name);
    if (!p.has_grad()) throw ContractError("sgd_step: parameter '" + name + "' has no gradient");
  }
  for (const auto& name : names) {
    Tensor& p = params.at(name);
    auto& v = state.velocity[name];
    if (v.size() != p.numel()) v.assign(p.numel(), 0.0);
    auto values = p.values();
    auto grad = p.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      v[i] = mu * v[i] + (grad[i] + wd * values[i]);
      values[i] -= lr * v[i];
    }
    p.zero_grad();
  }
  ++state.step_count;
}

double global_grad_norm(const ParamStore& params, std::span<const std::string> prefixes) {
  double ss = 0.0;
  for (const auto& e : params.entries()) {
    if (!has_prefix(e.name, prefixes) || !e.tensor->has_grad()) continue;
    for (double g : e.tensor->grad()) ss += g * g;
  }
  return std::sqrt(ss);
}

double clip_global_norm(ParamStore& params, double max_norm,
                        std::span<const std::string> prefixes) {
  if (!(max_norm > 0.0)) throw ContractError("clip_global_norm: max_norm must be positive");
  const double norm = global_grad_norm(params, prefixes);
  if (norm > max_norm * (1.0 + kClipSlack)) {
    const double factor = max_norm / norm;
    for (const auto& e : params.entries()) {
      if (!has_prefix(e.name, prefixes) || !e.tensor->has_grad()) continue;
      for (double& g : e.tensor->grad()) g *= factor;
    }
  }
  return norm;
}

}  // namespace tap::core
