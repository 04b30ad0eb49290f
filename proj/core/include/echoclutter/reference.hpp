#pragma once

#include <cstdint>
#include <vector>

#include "echoclutter/geometry.hpp"
#include "echoclutter/metrics.hpp"
#include "echoclutter/svd_filter.hpp"
#include "echoclutter/tensor.hpp"

/// Straightforward implementations used as test oracles. They share no code
/// with the production paths they check.
namespace echoclutter::reference {

/// Polar test (atan2 / hypot) of each pixel centre.
BinaryImage sector_mask(const SectorGeometry& g, std::uint32_t height, std::uint32_t width);

double mare(const Sequence& a, const Sequence& b);

/// Direct per-patch evaluation with a full (non-separable) window and
/// two-pass variance.
double ssim2d(const Sequence& a, const Sequence& b, const SsimConfig& cfg = {}, const BinaryImage* sector = nullptr);
double ssim3d(const Sequence& a, const Sequence& b, const SsimConfig& cfg = {}, const BinaryImage* sector = nullptr);

/// Window maxima of a 2x2x1 pooling.
Tensor maxpool(const Tensor& x);
/// Flat input index chosen per window: first maximum in row-major order.
std::vector<std::size_t> maxpool_argmax(const Tensor& x);

/// Square roots of the eigenvalues of A^T A, descending, min(rows, cols) of them.
std::vector<double> singular_values(const CasoratiBlock& b);

}  // namespace echoclutter::reference
