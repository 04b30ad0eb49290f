#include "echoclutter/geometry.hpp"

#include <cmath>
#include <numbers>

#include "echoclutter/error.hpp"

namespace echoclutter {

SectorGeometry SectorGeometry::default_for(std::uint32_t height, std::uint32_t width) {
  return SectorGeometry{0.0, static_cast<double>(width) / 2.0, 45.0, static_cast<double>(height)};
}

void SectorGeometry::validate() const {
  if (!(half_angle_deg > 0.0 && half_angle_deg < 90.0)) {
    throw ParameterError("sector half angle must lie in (0, 90) degrees, got " + std::to_string(half_angle_deg));
  }
  if (!(radius > 0.0)) {
    throw ParameterError("sector radius must be positive, got " + std::to_string(radius));
  }
}

bool SectorGeometry::contains(double row, double col) const noexcept {
  if (!(half_angle_deg > 0.0 && half_angle_deg < 90.0) || !(radius > 0.0)) {
    return false;
  }
  const double dy = row - apex_row;
  const double dx = col - apex_col;
  if (dy < 0.0) {
    return false;
  }
  // Boundaries are inclusive; the slack absorbs rounding of tan() so that
  // centres lying exactly on a 45 degree edge count as inside.
  if (dx * dx + dy * dy > radius * radius * (1.0 + 1e-12)) {
    return false;
  }
  const double tan_half = std::tan(half_angle_deg * std::numbers::pi / 180.0);
  return std::abs(dx) <= dy * tan_half * (1.0 + 1e-12) + 1e-12;
}

BinaryImage sector_mask(const SectorGeometry& geom, std::uint32_t height, std::uint32_t width) {
  BinaryImage mask{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 0)};
  for (std::uint32_t r = 0; r < height; ++r) {
    for (std::uint32_t c = 0; c < width; ++c) {
      mask.pixels[static_cast<std::size_t>(r) * width + c] = geom.contains(r + 0.5, c + 0.5) ? 1 : 0;
    }
  }
  return mask;
}

Sequence apply_default_sector(const Sequence& s) {
  const Dims& d = s.dims();
  const BinaryImage sector = sector_mask(SectorGeometry::default_for(d.height, d.width), d.height, d.width);
  std::vector<float> out(s.values().begin(), s.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!sector.pixels[i % d.frame_size()]) out[i] = 0.0F;
  }
  return Sequence(d, std::move(out));
}

void PhysicalCalibration::validate() const {
  if (!(cm_per_pixel > 0.0) || !(seconds_per_frame > 0.0)) {
    throw ParameterError("calibration values must be strictly positive");
  }
}

}  // namespace echoclutter
