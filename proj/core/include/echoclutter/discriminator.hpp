#pragma once

#include <cstdint>

#include "echoclutter/ops.hpp"
#include "echoclutter/param_store.hpp"

namespace echoclutter {

struct DiscriminatorConfig {
  int base_channels = 8;
  int blocks = 3;
  bool temporal_kernels = true;
};

/// Shallow residual classifier: stem conv-BN-ReLU, `blocks` residual blocks
/// that halve H and W and double the width, global average pooling and a
/// linear layer to one logit per sample.
class Discriminator {
 public:
  Discriminator(DiscriminatorConfig cfg, std::uint64_t seed);

  ParamStore& params() noexcept { return params_; }
  const DiscriminatorConfig& config() const noexcept { return cfg_; }

  /// (N, 1, H, W, F) -> (N, 1) logits.
  Var forward(const Var& x, Mode mode);

 private:
  DiscriminatorConfig cfg_;
  ParamStore params_;
};

}  // namespace echoclutter
