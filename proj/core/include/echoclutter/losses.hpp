#pragma once

#include <cstdint>
#include <vector>

#include "echoclutter/discriminator.hpp"
#include "echoclutter/filter_net.hpp"

namespace echoclutter {

inline Var loss_rec(const Var& pred, const Var& target) { return mse_loss(pred, target); }

struct AdversarialTerms {
  /// -log D(pred * m), non-saturating form; minimized by the filter.
  Var generator;
  /// -[log D(target * m) + log(1 - D(pred * m))] with pred detached;
  /// minimized by the discriminator.
  Var discriminator;
};

AdversarialTerms loss_adversarial(const Var& pred, const Var& target, const Var& mask, Discriminator& d, Mode mode);

/// Frozen feature extractor: a plain autoencoder (no gates, no residual skip)
/// whose first two encoder levels provide the feature taps.
class PerceptualNet {
 public:
  explicit PerceptualNet(std::uint64_t seed, int base_channels = 8, bool temporal = true);

  FilterNet& net() noexcept { return net_; }
  /// Taps at encoder levels 0 and 1, eval mode.
  std::vector<Var> features(const Var& x);
  void freeze() { net_.freeze(); }

  static NetConfig config_for(int base_channels, bool temporal);

 private:
  FilterNet net_;
};

/// Sum of per-tap mean squared differences.
Var feature_distance(const std::vector<Var>& a, const std::vector<Var>& b);

/// feature_distance(P(pred), P(target)); target features carry no gradient.
Var loss_perceptual(const Var& pred, const Var& target, PerceptualNet& p);

}  // namespace echoclutter
