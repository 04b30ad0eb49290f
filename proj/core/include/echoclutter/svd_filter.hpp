#pragma once

#include <cstdint>
#include <vector>

#include "echoclutter/sequence.hpp"

namespace echoclutter {

struct SvdFilterConfig {
  std::uint32_t roi = 5;
  /// Leading singular components removed per tile.
  std::uint32_t drop_count = 1;

  /// Throws ParameterError unless roi >= 1 and drop_count < min(roi^2, frames).
  void validate(std::uint32_t frames) const;
};

/// roi^2 x F slow-time matrix of one tile; column f is the row-major
/// vectorization of the tile in frame f.
struct CasoratiBlock {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::uint32_t roi = 0;
  std::uint32_t frames = 0;
  /// Row-major (roi^2) x frames.
  std::vector<double> values;

  double at(std::size_t pixel, std::size_t frame) const noexcept { return values[pixel * frames + frame]; }
};

/// Throws DimensionError when the tile leaves the image.
CasoratiBlock build_casorati(const Volume& v, std::uint32_t row, std::uint32_t col, std::uint32_t roi);
inline CasoratiBlock build_casorati(const Sequence& s, std::uint32_t row, std::uint32_t col, std::uint32_t roi) {
  return build_casorati(s.volume(), row, col, roi);
}

/// Writes the block back into `v` at its origin.
void scatter_casorati(const CasoratiBlock& b, Volume& v);

/// Singular values in descending order.
std::vector<double> singular_values(const CasoratiBlock& b);

/// U S' V^T with the k largest singular values zeroed. Throws NumericError
/// (naming the tile origin) if the decomposition yields non-finite values.
CasoratiBlock filter_block(const CasoratiBlock& b, std::uint32_t k);

struct SvdFilterReport {
  bool padded = false;
  std::uint32_t padded_height = 0;
  std::uint32_t padded_width = 0;
  std::size_t tiles = 0;
};

/// Non-overlapping tiling. Dims not divisible by roi are padded by edge
/// replication and cropped afterwards (recorded in `report`). Output is
/// clamped to [0, 1].
Sequence svd_filter_sequence(const Sequence& s, const SvdFilterConfig& cfg, SvdFilterReport* report = nullptr);

/// Same pipeline without the final clamp, for linearity checks.
Volume svd_filter_volume(const Volume& v, const SvdFilterConfig& cfg, SvdFilterReport* report = nullptr);

}  // namespace echoclutter
