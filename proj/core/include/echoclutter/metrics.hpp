#pragma once

#include <cstddef>
#include <vector>

#include "echoclutter/sequence.hpp"

namespace echoclutter {

/// Mean absolute difference after scaling both sequences to [0, 255].
double mare(const Sequence& reference, const Sequence& test);

struct SsimConfig {
  int window = 11;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;

  double c1() const noexcept { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const noexcept { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  void validate() const;
};

struct SsimResult {
  double value = 0.0;
  std::size_t patches_included = 0;
  std::size_t patches_excluded = 0;
  /// Temporal window actually used (1 for the 2D index; min(window, F) in 3D).
  int temporal_window = 1;
};

/// Normalized 1-D Gaussian weights of length n centred on (n - 1) / 2.
std::vector<double> gaussian_window(int n, double sigma);

/// Per-frame windowed SSIM over valid window positions (stride 1). Patch
/// pairs that are both entirely zero are skipped. With `sector`, pixels
/// outside it are zeroed in both inputs first. Throws UndefinedMetricError
/// if every patch is skipped, DimensionError if the window does not fit.
SsimResult ssim2d_detail(const Sequence& reference, const Sequence& test, const SsimConfig& cfg = {},
                         const BinaryImage* sector = nullptr);
/// Space-time variant with window x window x min(window, F) blocks.
SsimResult ssim3d_detail(const Sequence& reference, const Sequence& test, const SsimConfig& cfg = {},
                         const BinaryImage* sector = nullptr);

inline double ssim2d(const Sequence& a, const Sequence& b, const SsimConfig& cfg = {},
                     const BinaryImage* sector = nullptr) {
  return ssim2d_detail(a, b, cfg, sector).value;
}
inline double ssim3d(const Sequence& a, const Sequence& b, const SsimConfig& cfg = {},
                     const BinaryImage* sector = nullptr) {
  return ssim3d_detail(a, b, cfg, sector).value;
}

}  // namespace echoclutter
