#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "echoclutter/autograd.hpp"

namespace echoclutter {

struct GradCheckOptions {
  double perturbation = 1e-3;
  int directions = 4;
  std::uint64_t seed = 7;
  /// Probability that a direction component takes the sign of the analytic
  /// gradient (0.5 gives plain Rademacher directions). Leaning on the
  /// gradient raises the directional signal above float32 roundoff.
  double gradient_bias = 0.75;
};

/// Worst relative error between reverse-mode directional derivatives and
/// central differences of <r, f()> for a fixed random projection r, over
/// random +/-1 directions spanning every leaf in `leaves`. Leaf values are
/// perturbed in place and restored bit-exactly afterwards. Perturbed
/// evaluations replay the branch decisions of the unperturbed one (see
/// BranchLog), so differences are taken on a single smooth piece.
double grad_check_vars(const std::function<Var()>& f, const std::vector<Var>& leaves,
                       const GradCheckOptions& opts = {});

using DifferentiableFn = std::function<Var(const std::vector<Var>&)>;

/// Same check with fresh leaves built from `inputs`.
double grad_check(const DifferentiableFn& f, const std::vector<Tensor>& inputs, const GradCheckOptions& opts = {});

}  // namespace echoclutter
