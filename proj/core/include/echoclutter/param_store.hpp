#pragma once

#include <map>
#include <string>
#include <vector>

#include "echoclutter/autograd.hpp"

namespace echoclutter {

/// Named tensors in insertion order. Non-trainable entries (running
/// statistics) are saved with the weights but excluded from optimization and
/// from parameter_count().
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var var;
    bool trainable = true;
  };

  /// Throws ContractError on a duplicate name.
  Var add(const std::string& name, Tensor value, bool trainable = true);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<std::string> names() const;

  /// Number of trainable scalars.
  std::size_t parameter_count() const noexcept;
  void zero_grad();

  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace echoclutter
