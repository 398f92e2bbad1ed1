#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "tap/core/param_store.hpp"
#include "tap/core/tensor.hpp"

namespace tap::core {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradient accumulators handed to a backward rule, one per recorded input.
class GradSlots {
 public:
  // Empty span when input k does not require a gradient.
  std::span<double> operator[](std::size_t k) const { return slots_[k]; }
  bool needs(std::size_t k) const { return !slots_[k].empty() || sizes_[k] == 0; }

 private:
  friend class Graph;
  std::vector<std::span<double>> slots_;
  std::vector<std::size_t> sizes_;
};

/// Define-by-run tape for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, which is a topological order;
/// backward() walks reachable nodes in exactly the reverse order and sums
/// every contribution a node receives. A graph is built per forward pass and
/// must stay on one thread until backward() returns.
class Graph {
 public:
  using BackwardFn = std::function<void(std::span<const double> out_grad, const GradSlots& in)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf aliasing a stored parameter; backward() accumulates into its grad.
  // Parameters with requires_grad() == false behave as constants.
  Var param(std::shared_ptr<Tensor> tensor);
  Var param(const ParamStore& store, std::string_view name);
  Var constant(Tensor value);

  Var record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn fn);

  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return *nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    std::shared_ptr<Tensor> value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::vector<double> grad;
    std::string_view op;
    bool requires_grad = false;
    bool is_param = false;
  };

  std::vector<Node> nodes_;
};

}  // namespace tap::core
