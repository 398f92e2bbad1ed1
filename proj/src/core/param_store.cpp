#include "tap/core/param_store.hpp"

#include <algorithm>
#include <cstring>

#include "tap/errors.hpp"

namespace tap::core {

ParamStore::ParamStore(const ParamStore& other) {
  entries_.reserve(other.entries_.size());
  for (const auto& e : other.entries_) {
    entries_.push_back({e.name, std::make_shared<Tensor>(*e.tensor)});
  }
}

ParamStore& ParamStore::operator=(const ParamStore& other) {
  if (this != &other) {
    ParamStore copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Tensor& ParamStore::add(std::string name, Tensor init) {
  if (find(name)) throw ContractError("param store: duplicate parameter '" + name + "'");
  init.set_requires_grad(true);
  entries_.push_back({std::move(name), std::make_shared<Tensor>(std::move(init))});
  return *entries_.back().tensor;
}

const ParamStore::Entry* ParamStore::find(std::string_view name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const Entry& e) { return e.name == name; });
  return it == entries_.end() ? nullptr : &*it;
}

bool ParamStore::contains(std::string_view name) const { return find(name) != nullptr; }

Tensor& ParamStore::at(std::string_view name) { return *handle(name); }

const Tensor& ParamStore::at(std::string_view name) const { return *handle(name); }

std::shared_ptr<Tensor> ParamStore::handle(std::string_view name) const {
  const Entry* e = find(name);
  if (!e) throw ContractError("param store: no parameter named '" + std::string(name) + "'");
  return e->tensor;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::vector<std::string> ParamStore::names_with_prefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (std::string_view(e.name).substr(0, prefix.size()) == prefix) out.push_back(e.name);
  }
  return out;
}

std::size_t ParamStore::numel() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor->numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.tensor->zero_grad();
}

void ParamStore::clear_grad() {
  for (auto& e : entries_) e.tensor->clear_grad();
}

void ParamStore::set_requires_grad(std::string_view prefix, bool on) {
  for (auto& e : entries_) {
    if (std::string_view(e.name).substr(0, prefix.size()) == prefix) {
      e.tensor->set_requires_grad(on);
    }
  }
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.tensor->shape() != b.tensor->shape()) return false;
    auto va = a.tensor->values();
    auto vb = b.tensor->values();
    if (std::memcmp(va.data(), vb.data(), va.size_bytes()) != 0) return false;
  }
  return true;
}

}  // namespace tap::core
