#pragma once

#include <cstdint>

#include "echoclutter/sequence.hpp"

namespace echoclutter {

/// Downward-opening sector field of view of a phased-array recording.
///
/// Coordinates are continuous pixel units: pixel (i, j) covers
/// [i, i+1) x [j, j+1), so its center sits at (i + 0.5, j + 0.5).
/// The default apex (0, W/2) is the top edge midpoint, which makes the mask
/// left/right symmetric for any width.
struct SectorGeometry {
  double apex_row = 0.0;
  double apex_col = 0.0;
  double half_angle_deg = 45.0;
  double radius = 0.0;

  static SectorGeometry default_for(std::uint32_t height, std::uint32_t width);

  /// Throws ParameterError unless 0 < half_angle < 90 and radius > 0.
  void validate() const;

  /// Point-in-sector test for a continuous position.
  bool contains(double row, double col) const noexcept;

  friend bool operator==(const SectorGeometry&, const SectorGeometry&) = default;
};

/// 1 where the pixel center lies inside the sector cone and radius.
/// Degenerate geometries (half angle outside (0, 90) or radius <= 0) give an
/// all-zero mask.
BinaryImage sector_mask(const SectorGeometry& geom, std::uint32_t height, std::uint32_t width);

/// Copy of `s` with every pixel outside the default sector of its frame size
/// set to zero.
Sequence apply_default_sector(const Sequence& s);

/// Converts physical velocities into pixel displacements.
struct PhysicalCalibration {
  double cm_per_pixel = 0.117;
  double seconds_per_frame = 0.02;

  void validate() const;

  /// Pixels travelled per frame at `velocity_cm_s`.
  double pixels_per_frame(double velocity_cm_s) const noexcept {
    return velocity_cm_s / cm_per_pixel * seconds_per_frame;
  }
};

}  // namespace echoclutter
