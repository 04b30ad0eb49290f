#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "echoclutter/autograd.hpp"
#include "echoclutter/metrics.hpp"

namespace echoclutter {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Implementations under test. The defaults are the production functions;
/// tests swap in broken variants to confirm the oracles catch them.
struct VerifyHooks {
  std::function<Var(const Var&)> maxpool;
  std::function<double(const Sequence&, const Sequence&, const SsimConfig&)> ssim2d;
  std::function<double(const Sequence&, const Sequence&, const SsimConfig&)> ssim3d;

  static VerifyHooks defaults();
};

inline constexpr double kGradTolerance = 1e-3;

struct GradResult {
  std::string op;
  double error = 0.0;
};

/// Relative gradient-check error of every differentiable building block on
/// small randomized instances, ending with a complete tiny network.
std::vector<GradResult> gradient_suite(std::uint64_t seed, const VerifyHooks& hooks = VerifyHooks::defaults());

std::vector<CheckResult> run_verification(const VerifyHooks& hooks = VerifyHooks::defaults(), std::uint64_t seed = 1);

}  // namespace echoclutter
