#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "echoclutter/tensor.hpp"

namespace echoclutter {

struct Variable;
using Var = std::shared_ptr<Variable>;

/// Node of the reverse-mode tape. `grad` is allocated on first accumulation.
struct Variable {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<Var> parents;
  /// Reads this->grad and accumulates into the parents' grads.
  std::function<void(Variable&)> backward_fn;

  const Shape& shape() const noexcept { return value.shape(); }
  /// Zero-filled grad of the value's shape if none exists yet.
  Tensor& grad_buffer();
  void accumulate(const Tensor& g);
};

Var make_leaf(Tensor value, bool requires_grad);
inline Var constant(Tensor value) { return make_leaf(std::move(value), false); }

/// Result node; the tape entry is recorded only when gradients are enabled
/// and some parent requires them.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Variable&)> backward_fn);

/// Seeds d(root)/d(root) = 1 for a single-element root and propagates in
/// reverse topological order. Leaf grads accumulate across calls.
void backward(const Var& root);

/// Thread-local switch for tape recording.
class GradMode {
 public:
  static bool enabled() noexcept;
  static void set_enabled(bool on) noexcept;
};

/// Branch decisions of piecewise operations (relu sign patterns, pooling
/// winners). A log is filled while recording and read
/// back in the same order while replaying, which pins a perturbed
/// evaluation to the smooth piece of the original one.
struct BranchLog {
  std::vector<std::vector<std::uint32_t>> decisions;
  bool replaying = false;
  std::size_t cursor = 0;

  /// Next recorded decision vector; ContractError unless it has `n` entries.
  const std::vector<std::uint32_t>& next(std::size_t n);
};

/// Makes `log` the active branch log of this thread for the scope's lifetime.
class BranchScope {
 public:
  explicit BranchScope(BranchLog& log);
  ~BranchScope();
  BranchScope(const BranchScope&) = delete;
  BranchScope& operator=(const BranchScope&) = delete;

  static BranchLog* current() noexcept;

 private:
  BranchLog* prev_;
};

/// Turns recording on for a training loop entered from a no-grad scope.
class EnableGradGuard {
 public:
  EnableGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(true); }
  ~EnableGradGuard() { GradMode::set_enabled(prev_); }
  EnableGradGuard(const EnableGradGuard&) = delete;
  EnableGradGuard& operator=(const EnableGradGuard&) = delete;

 private:
  bool prev_;
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

}  // namespace echoclutter
