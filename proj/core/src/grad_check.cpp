#include "echoclutter/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "echoclutter/error.hpp"
#include "echoclutter/random.hpp"

namespace echoclutter {

namespace {

double project(const Tensor& y, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) s += r[i] * y[i];
  return s;
}

}  // namespace

double grad_check_vars(const std::function<Var()>& f, const std::vector<Var>& leaves, const GradCheckOptions& opts) {
  Rng rng(opts.seed);
  for (const auto& l : leaves) {
    if (!l->requires_grad) throw ContractError("grad_check: leaf does not require grad");
    l->grad = Tensor();
  }
  BranchLog branches;
  Var y;
  {
    BranchScope scope(branches);
    y = f();
  }
  branches.replaying = true;
  std::vector<double> r(y->value.numel());
  for (double& v : r) v = static_cast<float>(rng.normal());

  Tensor rt(y->shape());
  for (std::size_t i = 0; i < r.size(); ++i) rt[i] = static_cast<float>(r[i]);
  const Var proj = make_result(Tensor::scalar(0.0F), {y}, [y, rt](Variable& self) {
    Tensor g = rt;
    for (float& v : g.values()) v *= self.grad[0];
    y->accumulate(g);
  });
  backward(proj);

  std::vector<Tensor> grads, saved;
  for (const auto& l : leaves) {
    grads.push_back(l->grad.empty() ? Tensor(l->shape()) : l->grad);
    saved.push_back(l->value);
  }

  double worst = 0.0;
  std::vector<Tensor> plus(leaves.size()), minus(leaves.size());
  auto eval_at = [&](const std::vector<Tensor>& point) {
    NoGradGuard guard;
    BranchScope scope(branches);
    branches.cursor = 0;
    for (std::size_t j = 0; j < leaves.size(); ++j) leaves[j]->value = point[j];
    const double s = project(f()->value, r);
    for (std::size_t j = 0; j < leaves.size(); ++j) leaves[j]->value = saved[j];
    return s;
  };
  for (int k = 0; k < opts.directions; ++k) {
    // The analytic side uses the steps actually realized after rounding the
    // perturbed inputs to float, which would otherwise dominate the error.
    double analytic = 0.0;
    for (std::size_t j = 0; j < leaves.size(); ++j) {
      plus[j] = saved[j];
      minus[j] = saved[j];
      for (std::size_t i = 0; i < saved[j].numel(); ++i) {
        const double g = grads[j][i];
        const double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : (rng.below(2) ? 1.0 : -1.0));
        const double d = (rng.bernoulli(opts.gradient_bias) ? sign : -sign) * opts.perturbation;
        plus[j][i] = static_cast<float>(saved[j][i] + d);
        minus[j][i] = static_cast<float>(saved[j][i] - d);
        analytic += g * (static_cast<double>(plus[j][i]) - minus[j][i]);
      }
    }
    const double numeric = eval_at(plus) - eval_at(minus);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

double grad_check(const DifferentiableFn& f, const std::vector<Tensor>& inputs, const GradCheckOptions& opts) {
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(make_leaf(t, true));
  return grad_check_vars([&] { return f(leaves); }, leaves, opts);
}

}  // namespace echoclutter
