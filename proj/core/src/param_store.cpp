#include "echoclutter/param_store.hpp"

#include "echoclutter/error.hpp"

namespace echoclutter {

Var ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (index_.count(name)) {
    throw ContractError("duplicate parameter name '" + name + "'");
  }
  Var v = make_leaf(std::move(value), trainable);
  index_[name] = entries_.size();
  entries_.push_back({name, v, trainable});
  return v;
}

const Var& ParamStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) {
    throw ContractError("unknown parameter '" + name + "'");
  }
  return entries_[it->second].var;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::size_t ParamStore::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.var->value.numel();
  }
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) {
    if (e.var->grad.numel()) e.var->grad.fill(0.0F);
  }
}

std::vector<Tensor> ParamStore::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.var->value);
  return out;
}

void ParamStore::restore(const std::vector<Tensor>& values) {
  if (values.size() != entries_.size()) {
    throw ContractError("snapshot has " + std::to_string(values.size()) + " entries, store has " +
                        std::to_string(entries_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    require_same_shape(entries_[i].var->value, values[i], "restore");
    entries_[i].var->value = values[i];
  }
}

}  // namespace echoclutter
