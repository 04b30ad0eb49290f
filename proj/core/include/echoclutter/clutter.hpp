#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "echoclutter/geometry.hpp"
#include "echoclutter/kv_config.hpp"
#include "echoclutter/sequence.hpp"

namespace echoclutter {

/// Peak-normalized separable Gaussian blob. Offsets are (dv, dh): dv runs
/// along the axial (row) axis of the unrotated patch, dh along the lateral.
struct GaussianPatch {
  double sigma_v = 0.0;
  double sigma_h = 0.0;
  double gain = 0.0;
  int half_v = 0;
  int half_h = 0;
  /// (2*half_v+1) rows by (2*half_h+1) columns, row-major.
  std::vector<float> values;

  int rows() const noexcept { return 2 * half_v + 1; }
  int cols() const noexcept { return 2 * half_h + 1; }
  float at(int dv, int dh) const noexcept {
    return values[static_cast<std::size_t>(dv + half_v) * cols() + (dh + half_h)];
  }
};

/// Throws ParameterError for non-positive sigmas or gain outside [0, 255].
GaussianPatch gaussian_patch(double sigma_v, double sigma_h, double gain);

enum class ClutterClass : std::uint8_t { NF, RL, NFRL };
enum class CardiacLevel : std::uint8_t { Base, Mid, Apex };
enum class SectorEdge : std::uint8_t { Right, Left };

std::string to_string(ClutterClass c);
std::string to_string(CardiacLevel l);
std::string to_string(SectorEdge e);
ClutterClass parse_clutter_class(const std::string& s);
CardiacLevel parse_cardiac_level(const std::string& s);
SectorEdge parse_sector_edge(const std::string& s);

struct NfParams {
  double sigma_v = 0.0;
  double sigma_h = 0.0;
  double gain = 0.0;
  friend bool operator==(const NfParams&, const NfParams&) = default;
};

struct RlParams {
  double sigma_v = 0.0;
  double sigma_h = 0.0;
  double gain = 0.0;
  CardiacLevel level = CardiacLevel::Mid;
  SectorEdge edge = SectorEdge::Right;
  double velocity_cm_s = 0.0;
  friend bool operator==(const RlParams&, const RlParams&) = default;
};

struct ClutterSpec {
  ClutterClass cls = ClutterClass::NF;
  std::optional<NfParams> nf;
  std::optional<RlParams> rl;
  int pattern_id = -1;

  /// Throws ContractError when the parameter sets do not match the class.
  void validate() const;
  friend bool operator==(const ClutterSpec&, const ClutterSpec&) = default;
};

/// Factor grids of the pattern enumeration. Joint patterns are the cross
/// product of a reduced NF grid and a reduced RL grid.
struct PatternGrids {
  std::vector<double> nf_sigma_v{10, 15, 20};
  std::vector<double> nf_sigma_h{5, 10};
  std::vector<double> nf_gain{150, 200, 255};

  std::vector<double> rl_sigma_v{3, 5};
  std::vector<double> rl_sigma_h{7, 9, 11};
  std::vector<double> rl_gain{150, 200, 255};
  std::vector<CardiacLevel> rl_levels{CardiacLevel::Base, CardiacLevel::Mid, CardiacLevel::Apex};
  std::vector<SectorEdge> rl_edges{SectorEdge::Right, SectorEdge::Left};
  std::vector<double> rl_velocity{0.0, 0.5, 1.0};

  std::vector<double> joint_nf_sigma_v{10, 15, 20};
  std::vector<double> joint_nf_sigma_h{5, 10};
  std::vector<double> joint_nf_gain{200, 255};
  std::vector<double> joint_rl_sigma_v{5};
  std::vector<double> joint_rl_sigma_h{9, 11};
  std::vector<double> joint_rl_gain{200, 255};
  std::vector<CardiacLevel> joint_rl_levels{CardiacLevel::Mid, CardiacLevel::Apex};
  std::vector<SectorEdge> joint_rl_edges{SectorEdge::Right};
  std::vector<double> joint_rl_velocity{0.0, 1.0};
};

/// Tunables of the simulator, loadable from a KvConfig.
struct ClutterConfig {
  PhysicalCalibration calibration{};
  /// Near-field axial band as fractions of the image height below the apex.
  double nf_band_lo = 0.05;
  double nf_band_hi = 0.25;
  double mask_threshold = 0.02;
  double subsector_angle_deg = 35.0;
  /// Pixel-size multiplier relative to a 128-row frame. 0 means height/128.
  double spatial_scale = 0.0;
  PatternGrids grids{};

  static ClutterConfig from_kv(const KvConfig& kv);
  void validate() const;
  double scale_for(std::uint32_t height) const noexcept {
    return spatial_scale > 0.0 ? spatial_scale : static_cast<double>(height) / 128.0;
  }
  /// Calibration seen at a given frame size: a smaller frame means larger pixels.
  PhysicalCalibration calibration_for(std::uint32_t height) const noexcept {
    return {calibration.cm_per_pixel / scale_for(height), calibration.seconds_per_frame};
  }
};

/// NF patterns, then RL, then joint; pattern_id is the position in this list.
std::vector<ClutterSpec> enumerate_pattern_specs(const PatternGrids& grids = {});

/// patterns x views x vendors x groups.
std::uint64_t dataset_size(std::uint64_t patterns, std::uint64_t views, std::uint64_t vendors, std::uint64_t groups);

/// One rendered blob and its trajectory.
struct PlacedComponent {
  GaussianPatch patch;
  /// Angle in degrees between the patch's axial axis and the image's
  /// downward row axis, positive toward +col.
  double rotation_deg = 0.0;
  /// (row, col) per frame, continuous pixel coordinates.
  std::vector<std::pair<double, double>> centers;
};

struct PlacedClutter {
  ClutterSpec spec;
  std::uint32_t frames = 0;
  std::vector<PlacedComponent> components;
};

struct PlacementOptions {
  double nf_band_lo = 0.05;
  double nf_band_hi = 0.25;
  double subsector_angle_deg = 35.0;
  /// Multiplies both sigmas before the patch is built.
  double patch_scale = 1.0;

  static PlacementOptions from(const ClutterConfig& cfg, std::uint32_t height) {
    return {cfg.nf_band_lo, cfg.nf_band_hi, cfg.subsector_angle_deg, cfg.scale_for(height)};
  }
};

/// Static blob on the sector centerline, axial center uniform in the band.
PlacedClutter place_nf(const ClutterSpec& spec, const SectorGeometry& geom, std::uint32_t height,
                       std::uint32_t frames, std::uint64_t seed, const PlacementOptions& opts = {});

/// Blob inside the left or right edge sub-sector at the radial third of its
/// level, aligned with the radial direction, drifting laterally toward the
/// sector interior at constant speed.
PlacedClutter place_rl(const ClutterSpec& spec, const SectorGeometry& geom, const PhysicalCalibration& cal,
                       std::uint32_t height, std::uint32_t width, std::uint32_t frames, std::uint64_t seed,
                       const PlacementOptions& opts = {});

/// Dispatches on the class; joint specs get one NF and one RL component.
PlacedClutter place_clutter(const ClutterSpec& spec, const SectorGeometry& geom, const PhysicalCalibration& cal,
                            std::uint32_t height, std::uint32_t width, std::uint32_t frames, std::uint64_t seed,
                            const PlacementOptions& opts = {});

/// Bilinear forward splat of every component; mass outside the image is dropped.
Volume render_clutter_volume(const PlacedClutter& placed, std::uint32_t height, std::uint32_t width,
                             std::uint32_t frames);

struct Superimposed {
  Sequence cluttered;
  BinaryVolume mask;
};

/// Saturating addition inside the sector, exact zero outside it.
Superimposed superimpose(const Sequence& clean, const Volume& clutter, const SectorGeometry& geom,
                         double mask_threshold = 0.02);

struct ShiftedPair {
  Sequence input;
  Sequence target;
  /// 1-based frame of the original that became frame 1.
  std::uint32_t start_frame = 1;
  /// Outcome of the Bernoulli draw; a drawn start frame of 1 is still a shift.
  bool shifted = false;
};

/// Cyclic temporal rotation applied identically to both sequences with
/// probability p.
ShiftedPair time_shift_pair(const Sequence& input, const Sequence& target, double p, std::uint64_t seed);

/// Cyclic rotation so that 1-based frame `start_frame` comes first.
Sequence rotate_frames(const Sequence& s, std::uint32_t start_frame);

}  // namespace echoclutter
