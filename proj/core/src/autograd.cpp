#include "echoclutter/autograd.hpp"

#include <unordered_set>

#include "echoclutter/error.hpp"

namespace echoclutter {

namespace {
thread_local bool g_grad_enabled = true;
thread_local BranchLog* g_branch_log = nullptr;
}  // namespace

const std::vector<std::uint32_t>& BranchLog::next(std::size_t n) {
  if (cursor >= decisions.size() || decisions[cursor].size() != n) {
    throw ContractError("branch replay diverged from the recorded evaluation");
  }
  return decisions[cursor++];
}

BranchScope::BranchScope(BranchLog& log) : prev_(g_branch_log) { g_branch_log = &log; }
BranchScope::~BranchScope() { g_branch_log = prev_; }
BranchLog* BranchScope::current() noexcept { return g_branch_log; }

bool GradMode::enabled() noexcept { return g_grad_enabled; }
void GradMode::set_enabled(bool on) noexcept { g_grad_enabled = on; }

Tensor& Variable::grad_buffer() {
  if (grad.shape() != value.shape()) {
    grad = Tensor(value.shape());
  }
  return grad;
}

void Variable::accumulate(const Tensor& g) { grad_buffer().add_(g); }

Var make_leaf(Tensor value, bool requires_grad) {
  auto v = std::make_shared<Variable>();
  v->value = std::move(value);
  v->requires_grad = requires_grad;
  return v;
}

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Variable&)> backward_fn) {
  auto v = std::make_shared<Variable>();
  v->value = std::move(value);
  if (!GradMode::enabled()) {
    return v;
  }
  bool needs = false;
  for (const auto& p : parents) {
    needs = needs || (p && p->requires_grad);
  }
  if (needs) {
    v->requires_grad = true;
    v->parents = std::move(parents);
    v->backward_fn = std::move(backward_fn);
  }
  return v;
}

void backward(const Var& root) {
  if (!root || root->value.numel() != 1) {
    throw ContractError("backward needs a single-element root");
  }
  if (!root->requires_grad) {
    return;
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<Variable*> order;
  std::unordered_set<Variable*> seen;
  std::vector<std::pair<Variable*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Variable* p = node->parents[next++].get();
      if (p && p->requires_grad && seen.insert(p).second) {
        stack.emplace_back(p, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }
  root->grad_buffer()[0] += 1.0F;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Variable* node = *it;
    if (node->backward_fn && node->grad.numel() == node->value.numel()) {
      node->backward_fn(*node);
    }
  }
}

}  // namespace echoclutter
