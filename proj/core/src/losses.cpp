#include "echoclutter/losses.hpp"

#include "echoclutter/error.hpp"

namespace echoclutter {

AdversarialTerms loss_adversarial(const Var& pred, const Var& target, const Var& mask, Discriminator& d, Mode mode) {
  require_same_shape(pred->value, target->value, "loss_adversarial");
  require_same_shape(pred->value, mask->value, "loss_adversarial mask");
  const Var fake = mul(pred, mask);
  const Var real = mul(target, mask);
  AdversarialTerms t;
  t.generator = bce_with_logits(d.forward(fake, mode), 1.0F);
  const Var fake_detached = constant(fake->value);
  t.discriminator = add(bce_with_logits(d.forward(real, mode), 1.0F),
                        bce_with_logits(d.forward(fake_detached, mode), 0.0F));
  return t;
}

NetConfig PerceptualNet::config_for(int base_channels, bool temporal) {
  NetConfig c;
  c.levels = 2;
  c.base_channels = base_channels;
  c.use_attention = false;
  c.use_residual_skip = false;
  c.temporal_kernels = temporal;
  c.dropout_rate = 0.0F;
  return c;
}

PerceptualNet::PerceptualNet(std::uint64_t seed, int base_channels, bool temporal)
    : net_(config_for(base_channels, temporal), seed) {}

std::vector<Var> PerceptualNet::features(const Var& x) { return net_.encoder_features(x, Mode::Eval, 2); }

Var feature_distance(const std::vector<Var>& a, const std::vector<Var>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw DimensionError("feature_distance: tap counts differ or are zero");
  }
  Var total = mse_loss(a[0], b[0]);
  for (std::size_t i = 1; i < a.size(); ++i) total = add(total, mse_loss(a[i], b[i]));
  return total;
}

Var loss_perceptual(const Var& pred, const Var& target, PerceptualNet& p) {
  std::vector<Var> ft;
  {
    NoGradGuard guard;
    ft = p.features(target);
  }
  return feature_distance(p.features(pred), ft);
}

}  // namespace echoclutter
