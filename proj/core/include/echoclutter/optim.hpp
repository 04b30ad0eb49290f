#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>

#include "echoclutter/param_store.hpp"

namespace echoclutter {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

/// Bias-corrected Adam over the trainable entries of `params`. Every
/// trainable name must be present in `grads` (ContractError otherwise).
void adam_step(ParamStore& params, const std::map<std::string, const Tensor*>& grads, AdamState& state, double lr);

/// Same, reading each parameter's accumulated grad (absent grads count as 0).
void adam_step(ParamStore& params, AdamState& state, double lr);

/// Reduce-on-plateau schedule. A loss counts as an improvement only when it
/// is strictly below the best so far.
struct LRSchedulerState {
  double current_lr = 1e-4;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;
  double factor = 0.1;
  int patience = 4;
  double min_lr = 1e-7;
};

/// Returns the learning rate for the next epoch. Reduced rates are rounded to
/// 12 significant digits so repeated decades stay exact decimals.
double lr_plateau_update(LRSchedulerState& state, double validation_loss);

}  // namespace echoclutter
