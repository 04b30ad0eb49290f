#include "echoclutter/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "echoclutter/error.hpp"

namespace echoclutter {

namespace {

void update_one(const std::string& name, Tensor& p, const Tensor& g, AdamState& st, double lr, double c1, double c2) {
  Tensor& m = st.m[name];
  Tensor& v = st.v[name];
  if (m.shape() != p.shape()) m = Tensor(p.shape());
  if (v.shape() != p.shape()) v = Tensor(p.shape());
  const float b1 = static_cast<float>(st.beta1), b2 = static_cast<float>(st.beta2);
  const bool zero = g.empty();
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const float gi = zero ? 0.0F : g[i];
    m[i] = b1 * m[i] + (1.0F - b1) * gi;
    v[i] = b2 * v[i] + (1.0F - b2) * gi * gi;
    const double mh = m[i] / c1;
    const double vh = v[i] / c2;
    p[i] -= static_cast<float>(lr * mh / (std::sqrt(vh) + st.eps));
  }
}

double round12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

}  // namespace

void adam_step(ParamStore& params, const std::map<std::string, const Tensor*>& grads, AdamState& state, double lr) {
  for (const auto& e : params.entries()) {
    if (!e.trainable) continue;
    const auto it = grads.find(e.name);
    if (it == grads.end() || it->second == nullptr) {
      throw ContractError("adam_step: missing gradient for '" + e.name + "'");
    }
    if (!it->second->empty()) require_same_shape(e.var->value, *it->second, "adam_step");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& e : params.entries()) {
    if (!e.trainable) continue;
    update_one(e.name, e.var->value, *grads.at(e.name), state, lr, c1, c2);
  }
}

void adam_step(ParamStore& params, AdamState& state, double lr) {
  std::map<std::string, const Tensor*> grads;
  for (const auto& e : params.entries()) {
    if (e.trainable) grads[e.name] = &e.var->grad;
  }
  adam_step(params, grads, state, lr);
}

double lr_plateau_update(LRSchedulerState& s, double validation_loss) {
  if (!std::isfinite(validation_loss)) {
    throw NumericError("validation loss is not finite");
  }
  if (validation_loss < s.best_validation_loss) {
    s.best_validation_loss = validation_loss;
    s.epochs_since_improvement = 0;
    return s.current_lr;
  }
  if (++s.epochs_since_improvement >= s.patience) {
    s.current_lr = std::max(round12(s.current_lr * s.factor), s.min_lr);
    s.epochs_since_improvement = 0;
  }
  return s.current_lr;
}

}  // namespace echoclutter
