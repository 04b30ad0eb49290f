#pragma once

#include <cstdint>
#include <vector>

#include "echoclutter/geometry.hpp"
#include "echoclutter/sequence.hpp"

namespace echoclutter {

/// Parameters of the synthetic echo phantom: a bright myocardial ring that
/// contracts periodically around a dark cavity, inside a sector, with a
/// multiplicative speckle texture that moves with the tissue.
struct PhantomConfig {
  std::uint32_t height = 64;
  std::uint32_t width = 64;
  SectorGeometry geometry = SectorGeometry::default_for(64, 64);
  std::uint64_t speckle_seed = 1;
  double wall_brightness = 0.6;
  double cavity_brightness = 0.05;
  double tissue_brightness = 0.25;
  /// Peak fractional reduction of the ring radius over one cycle.
  double contraction_amplitude = 0.2;
  std::uint32_t cycle_frames = 16;

  /// Ring layout as fractions of the sector radius.
  double ring_center_depth = 0.55;
  double ring_radius = 0.22;
  double wall_thickness = 0.07;

  static PhantomConfig default_for(std::uint32_t height, std::uint32_t width);

  /// Throws ParameterError on a violated invariant.
  void validate() const;
};

enum class PhantomRegion : std::uint8_t { Outside = 0, Tissue = 1, Wall = 2, Cavity = 3 };

/// Phase offset (in frames, within one cycle) chosen for `seed`.
std::uint32_t phantom_phase_offset(const PhantomConfig& cfg, std::uint64_t seed);

/// Ring radius in pixels at `frame` for `seed`.
double phantom_wall_radius(const PhantomConfig& cfg, std::uint32_t frame, std::uint64_t seed);

/// Pure function of its arguments. Pixels outside the sector are exactly 0.
Sequence generate_phantom(const PhantomConfig& cfg, std::uint32_t frames, std::uint64_t seed);

/// Per-voxel region labels used by the generator (frame-major layout).
std::vector<PhantomRegion> phantom_regions(const PhantomConfig& cfg, std::uint32_t frames, std::uint64_t seed);

}  // namespace echoclutter
