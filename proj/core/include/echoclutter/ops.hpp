#pragma once

#include <array>
#include <cstdint>

#include "echoclutter/autograd.hpp"

namespace echoclutter {

/// Same-padded cross-correlation. x: (N, Cin, H, W, F); weight:
/// (Cout, Cin, KH, KW, KF) with odd extents; bias: (Cout) or null.
/// Stride 2 subsamples H and W of the stride-1 result (even indices).
Var conv3d(const Var& x, const Var& weight, const Var& bias, int stride = 1);

/// 2x2x1 max pooling. Ties go to the first position in row-major order.
/// Odd H or W is a DimensionError.
Var maxpool3d(const Var& x);
/// 2x2x1 mean pooling (odd H or W is a DimensionError).
Var avgpool3d(const Var& x);
/// 2x2x1 nearest-neighbour upsampling.
Var upsample3d(const Var& x);

enum class Mode : std::uint8_t { Train, Eval };

inline constexpr float kBatchNormEps = 1e-5F;
/// Weight of the newest batch statistic in the running averages.
inline constexpr float kBatchNormUpdate = 0.1F;

/// Per-channel normalization over (N, H, W, F). In train mode the batch
/// statistics are used and the running buffers are updated (biased
/// variance); eval mode uses the running buffers.
Var batchnorm3d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var, Mode mode);

Var relu(const Var& x);
Var sigmoid(const Var& x);

/// Inverted dropout; identity in eval mode or when rate == 0.
Var dropout(const Var& x, float rate, Mode mode, std::uint64_t seed);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, float s);
/// x: (N, C, H, W, F) times a: (N, 1, H, W, F), broadcast over channels.
Var mul_channels(const Var& x, const Var& a);
/// Concatenation along dimension 1 of rank-5 tensors.
Var concat_channels(const Var& a, const Var& b);

Var sum(const Var& x);
Var mean(const Var& x);
Var mse_loss(const Var& pred, const Var& target);
/// Probability clamp used by bce_with_logits.
inline constexpr double kProbFloor = 1e-7;

/// Mean binary cross-entropy of sigmoid(logits) against a constant label in
/// {0, 1}, with probabilities clamped to [kProbFloor, 1 - kProbFloor].
Var bce_with_logits(const Var& logits, float label);

/// (N, C, H, W, F) -> (N, C).
Var global_avg_pool(const Var& x);
/// x: (N, In), weight: (Out, In), bias: (Out).
Var linear(const Var& x, const Var& weight, const Var& bias);

}  // namespace echoclutter
