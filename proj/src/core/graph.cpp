#include "tap/core/graph.hpp"

#include <algorithm>
#include <string>

#include "tap/errors.hpp"

namespace tap::core {

const Tensor& Var::value() const {
  if (!graph_) throw ContractError("var: use of an unbound variable");
  return graph_->value(id_);
}

Var Graph::param(std::shared_ptr<Tensor> tensor) {
  Node node;
  node.requires_grad = tensor->requires_grad();
  node.is_param = true;
  node.op = "param";
  node.value = std::move(tensor);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(const ParamStore& store, std::string_view name) {
  return param(store.handle(name));
}

Var Graph::constant(Tensor value) {
  Node node;
  node.op = "constant";
  node.value = std::make_shared<Tensor>(std::move(value));
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn fn) {
  Node node;
  node.op = op;
  node.value = std::make_shared<Tensor>(std::move(value));
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.graph_ != this) {
      throw ContractError(std::string(op) + ": input belongs to a different graph");
    }
    node.inputs.push_back(v.id_);
    node.requires_grad = node.requires_grad || nodes_[v.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw ContractError("backward: loss is not a node of this graph");
  const Tensor& out = value(loss.id_);
  if (out.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(out.shape()));
  }

  std::vector<char> reachable(loss.id_ + 1, 0);
  reachable[loss.id_] = 1;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    if (!reachable[id]) continue;
    for (std::size_t in : nodes_[id].inputs) reachable[in] = 1;
  }

  for (auto& node : nodes_) node.grad.clear();
  nodes_[loss.id_].grad.assign(1, 1.0);

  GradSlots slots;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!reachable[id] || !node.requires_grad || node.grad.empty()) continue;

    if (node.is_param) {
      auto g = node.value->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
      continue;
    }
    if (!node.backward) continue;

    slots.slots_.assign(node.inputs.size(), {});
    slots.sizes_.assign(node.inputs.size(), 1);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      Node& in = nodes_[node.inputs[k]];
      slots.sizes_[k] = in.value->numel();
      if (!in.requires_grad) continue;
      if (in.grad.empty()) in.grad.assign(in.value->numel(), 0.0);
      slots.slots_[k] = in.grad;
    }
    node.backward(node.grad, slots);
  }
}

}  // namespace tap::core
