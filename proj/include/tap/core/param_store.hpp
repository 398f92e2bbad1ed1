#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tap/core/tensor.hpp"

namespace tap::core {

/// Ordered, named collection of learnable tensors.
///
/// Names are namespaced by prefix ("theta/", "alpha/", "beta/"). Insertion
/// order is preserved and defines the checkpoint layout. Copies are deep, so
/// a copy is an independent snapshot that can be read from other threads.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::shared_ptr<Tensor> tensor;
  };

  ParamStore() = default;
  ParamStore(const ParamStore& other);
  ParamStore& operator=(const ParamStore& other);
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  Tensor& add(std::string name, Tensor init);
  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  std::shared_ptr<Tensor> handle(std::string_view name) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(std::string_view prefix) const;
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t numel() const;

  void zero_grad();
  void clear_grad();
  void set_requires_grad(std::string_view prefix, bool on);

  // Same names, shapes and bit-identical values (gradients ignored).
  bool same_values(const ParamStore& other) const;

 private:
  const Entry* find(std::string_view name) const;
  std::vector<Entry> entries_;
};

}  // namespace tap::core
