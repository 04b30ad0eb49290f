#include "echoclutter/clutter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "echoclutter/error.hpp"
#include "echoclutter/random.hpp"

namespace echoclutter {

namespace {

constexpr int kMaxPlacementTries = 1000;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

template <typename T, typename F>
std::vector<T> parse_list(const KvConfig& kv, const std::string& key, const std::vector<T>& fallback,
                          F&& parse_one, std::string (*fmt)(T)) {
  std::vector<std::string> defaults;
  for (const T& v : fallback) {
    defaults.push_back(fmt(v));
  }
  std::vector<T> out;
  for (const auto& s : kv.get_strings(key, defaults)) {
    out.push_back(parse_one(s));
  }
  return out;
}

std::string level_str(CardiacLevel l) { return to_string(l); }
std::string edge_str(SectorEdge e) { return to_string(e); }

void require_nonempty(const std::vector<double>& v, const char* name) {
  if (v.empty()) {
    throw ParameterError(std::string("empty grid: ") + name);
  }
}

}  // namespace

GaussianPatch gaussian_patch(double sigma_v, double sigma_h, double gain) {
  if (!(sigma_v > 0.0) || !(sigma_h > 0.0) || !std::isfinite(sigma_v) || !std::isfinite(sigma_h)) {
    throw ParameterError("gaussian patch sigmas must be positive and finite");
  }
  if (!(gain >= 0.0 && gain <= 255.0)) {
    throw ParameterError("gaussian patch gain must lie in [0,255]");
  }
  GaussianPatch p;
  p.sigma_v = sigma_v;
  p.sigma_h = sigma_h;
  p.gain = gain;
  p.half_v = static_cast<int>(std::ceil(3.0 * sigma_v));
  p.half_h = static_cast<int>(std::ceil(3.0 * sigma_h));
  p.values.resize(static_cast<std::size_t>(p.rows()) * p.cols());
  const double peak = gain / 255.0;
  for (int dv = -p.half_v; dv <= p.half_v; ++dv) {
    const double ev = std::exp(-0.5 * dv * dv / (sigma_v * sigma_v));
    for (int dh = -p.half_h; dh <= p.half_h; ++dh) {
      const double eh = std::exp(-0.5 * dh * dh / (sigma_h * sigma_h));
      p.values[static_cast<std::size_t>(dv + p.half_v) * p.cols() + (dh + p.half_h)] =
          static_cast<float>(peak * eh * ev);
    }
  }
  return p;
}

std::string to_string(ClutterClass c) {
  switch (c) {
    case ClutterClass::NF: return "NF";
    case ClutterClass::RL: return "RL";
    case ClutterClass::NFRL: return "NF_RL";
  }
  return "?";
}

std::string to_string(CardiacLevel l) {
  switch (l) {
    case CardiacLevel::Base: return "base";
    case CardiacLevel::Mid: return "mid";
    case CardiacLevel::Apex: return "apex";
  }
  return "?";
}

std::string to_string(SectorEdge e) { return e == SectorEdge::Right ? "right" : "left"; }

ClutterClass parse_clutter_class(const std::string& s) {
  if (s == "NF" || s == "nf") return ClutterClass::NF;
  if (s == "RL" || s == "rl") return ClutterClass::RL;
  if (s == "NF_RL" || s == "nfrl" || s == "NFRL") return ClutterClass::NFRL;
  throw ParameterError("unknown clutter class '" + s + "'");
}

CardiacLevel parse_cardiac_level(const std::string& s) {
  if (s == "base") return CardiacLevel::Base;
  if (s == "mid") return CardiacLevel::Mid;
  if (s == "apex") return CardiacLevel::Apex;
  throw ParameterError("unknown cardiac level '" + s + "'");
}

SectorEdge parse_sector_edge(const std::string& s) {
  if (s == "right") return SectorEdge::Right;
  if (s == "left") return SectorEdge::Left;
  throw ParameterError("unknown sector edge '" + s + "'");
}

void ClutterSpec::validate() const {
  const bool want_nf = cls != ClutterClass::RL;
  const bool want_rl = cls != ClutterClass::NF;
  if (nf.has_value() != want_nf || rl.has_value() != want_rl) {
    throw ContractError("clutter spec parameters do not match class " + to_string(cls));
  }
}

ClutterConfig ClutterConfig::from_kv(const KvConfig& kv) {
  ClutterConfig c;
  c.calibration.cm_per_pixel = kv.get_double("calibration.cm_per_pixel", c.calibration.cm_per_pixel);
  c.calibration.seconds_per_frame = kv.get_double("calibration.seconds_per_frame", c.calibration.seconds_per_frame);
  c.nf_band_lo = kv.get_double("nf_band.lo", c.nf_band_lo);
  c.nf_band_hi = kv.get_double("nf_band.hi", c.nf_band_hi);
  c.mask_threshold = kv.get_double("mask_threshold", c.mask_threshold);
  c.subsector_angle_deg = kv.get_double("subsector_angle", c.subsector_angle_deg);
  c.spatial_scale = kv.get_double("spatial_scale", c.spatial_scale);

  PatternGrids& g = c.grids;
  g.nf_sigma_v = kv.get_doubles("grid.nf.sigma_v", g.nf_sigma_v);
  g.nf_sigma_h = kv.get_doubles("grid.nf.sigma_h", g.nf_sigma_h);
  g.nf_gain = kv.get_doubles("grid.nf.gain", g.nf_gain);
  g.rl_sigma_v = kv.get_doubles("grid.rl.sigma_v", g.rl_sigma_v);
  g.rl_sigma_h = kv.get_doubles("grid.rl.sigma_h", g.rl_sigma_h);
  g.rl_gain = kv.get_doubles("grid.rl.gain", g.rl_gain);
  g.rl_levels = parse_list(kv, "grid.rl.levels", g.rl_levels, parse_cardiac_level, level_str);
  g.rl_edges = parse_list(kv, "grid.rl.edges", g.rl_edges, parse_sector_edge, edge_str);
  g.rl_velocity = kv.get_doubles("grid.rl.velocity", g.rl_velocity);
  g.joint_nf_sigma_v = kv.get_doubles("grid.joint_nf.sigma_v", g.joint_nf_sigma_v);
  g.joint_nf_sigma_h = kv.get_doubles("grid.joint_nf.sigma_h", g.joint_nf_sigma_h);
  g.joint_nf_gain = kv.get_doubles("grid.joint_nf.gain", g.joint_nf_gain);
  g.joint_rl_sigma_v = kv.get_doubles("grid.joint_rl.sigma_v", g.joint_rl_sigma_v);
  g.joint_rl_sigma_h = kv.get_doubles("grid.joint_rl.sigma_h", g.joint_rl_sigma_h);
  g.joint_rl_gain = kv.get_doubles("grid.joint_rl.gain", g.joint_rl_gain);
  g.joint_rl_levels = parse_list(kv, "grid.joint_rl.levels", g.joint_rl_levels, parse_cardiac_level, level_str);
  g.joint_rl_edges = parse_list(kv, "grid.joint_rl.edges", g.joint_rl_edges, parse_sector_edge, edge_str);
  g.joint_rl_velocity = kv.get_doubles("grid.joint_rl.velocity", g.joint_rl_velocity);
  c.validate();
  return c;
}

void ClutterConfig::validate() const {
  calibration.validate();
  if (!(nf_band_lo >= 0.0 && nf_band_lo <= nf_band_hi && nf_band_hi <= 1.0)) {
    throw ParameterError("nf band must satisfy 0 <= lo <= hi <= 1");
  }
  if (!(mask_threshold >= 0.0 && mask_threshold < 1.0)) {
    throw ParameterError("mask_threshold must lie in [0,1)");
  }
  if (!(subsector_angle_deg > 0.0 && subsector_angle_deg < 180.0)) {
    throw ParameterError("subsector_angle must lie in (0,180)");
  }
  if (!(spatial_scale >= 0.0) || !std::isfinite(spatial_scale)) {
    throw ParameterError("spatial_scale must be >= 0");
  }
  for (const auto* v : {&grids.nf_sigma_v, &grids.nf_sigma_h, &grids.nf_gain, &grids.rl_sigma_v, &grids.rl_sigma_h,
                        &grids.rl_gain, &grids.rl_velocity}) {
    require_nonempty(*v, "class grid");
  }
}

std::vector<ClutterSpec> enumerate_pattern_specs(const PatternGrids& g) {
  std::vector<ClutterSpec> out;
  auto nf_grid = [](const std::vector<double>& sv, const std::vector<double>& sh, const std::vector<double>& gain) {
    std::vector<NfParams> v;
    for (double a : sv)
      for (double b : sh)
        for (double c : gain) v.push_back({a, b, c});
    return v;
  };
  auto rl_grid = [](const std::vector<double>& sv, const std::vector<double>& sh, const std::vector<double>& gain,
                    const std::vector<CardiacLevel>& levels, const std::vector<SectorEdge>& edges,
                    const std::vector<double>& vel) {
    std::vector<RlParams> v;
    for (double a : sv)
      for (double b : sh)
        for (double c : gain)
          for (CardiacLevel l : levels)
            for (SectorEdge e : edges)
              for (double s : vel) v.push_back({a, b, c, l, e, s});
    return v;
  };

  for (const auto& nf : nf_grid(g.nf_sigma_v, g.nf_sigma_h, g.nf_gain)) {
    out.push_back({ClutterClass::NF, nf, std::nullopt, static_cast<int>(out.size())});
  }
  for (const auto& rl : rl_grid(g.rl_sigma_v, g.rl_sigma_h, g.rl_gain, g.rl_levels, g.rl_edges, g.rl_velocity)) {
    out.push_back({ClutterClass::RL, std::nullopt, rl, static_cast<int>(out.size())});
  }
  const auto jnf = nf_grid(g.joint_nf_sigma_v, g.joint_nf_sigma_h, g.joint_nf_gain);
  const auto jrl = rl_grid(g.joint_rl_sigma_v, g.joint_rl_sigma_h, g.joint_rl_gain, g.joint_rl_levels,
                           g.joint_rl_edges, g.joint_rl_velocity);
  for (const auto& nf : jnf) {
    for (const auto& rl : jrl) {
      out.push_back({ClutterClass::NFRL, nf, rl, static_cast<int>(out.size())});
    }
  }
  return out;
}

std::uint64_t dataset_size(std::uint64_t patterns, std::uint64_t views, std::uint64_t vendors, std::uint64_t groups) {
  return patterns * views * vendors * groups;
}

namespace {

PlacedComponent nf_component(const NfParams& nf, const SectorGeometry& geom, std::uint32_t height,
                             std::uint32_t frames, std::uint64_t seed, const PlacementOptions& opts) {
  const double lo = geom.apex_row + opts.nf_band_lo * height;
  const double hi = geom.apex_row + opts.nf_band_hi * height;
  if (lo < 0.0 || hi > static_cast<double>(height) || lo > hi) {
    throw PlacementError("near-field band [" + std::to_string(lo) + ", " + std::to_string(hi) +
                         "] lies outside the image");
  }
  Rng rng(seed);
  const double row = rng.uniform(lo, hi);
  PlacedComponent c;
  c.patch = gaussian_patch(nf.sigma_v * opts.patch_scale, nf.sigma_h * opts.patch_scale, nf.gain);
  c.rotation_deg = 0.0;
  c.centers.assign(frames, {row, geom.apex_col});
  return c;
}

PlacedComponent rl_component(const RlParams& rl, const SectorGeometry& geom, const PhysicalCalibration& cal,
                             std::uint32_t height, std::uint32_t width, std::uint32_t frames, std::uint64_t seed,
                             const PlacementOptions& opts) {
  geom.validate();
  const double half = geom.half_angle_deg;
  const double span = std::min(opts.subsector_angle_deg, 2.0 * half);
  // Angle from the sector axis, positive toward +col.
  const double th_lo = rl.edge == SectorEdge::Right ? half - span : -half;
  const double th_hi = rl.edge == SectorEdge::Right ? half : -half + span;
  const double R = geom.radius;
  double r_lo = 0.0;
  double r_hi = R / 3.0;
  if (rl.level == CardiacLevel::Mid) {
    r_lo = R / 3.0;
    r_hi = 2.0 * R / 3.0;
  } else if (rl.level == CardiacLevel::Base) {
    r_lo = 2.0 * R / 3.0;
    r_hi = R;
  }

  Rng rng(seed);
  for (int attempt = 0; attempt < kMaxPlacementTries; ++attempt) {
    const double th = rng.uniform(th_lo, th_hi);
    // Area-uniform radius inside the annular third.
    const double rho = std::sqrt(rng.uniform(r_lo * r_lo, r_hi * r_hi));
    const double row = geom.apex_row + rho * std::cos(deg2rad(th));
    const double col = geom.apex_col + rho * std::sin(deg2rad(th));
    if (row < 0.0 || row >= height || col < 0.0 || col >= width || !geom.contains(row, col)) {
      continue;
    }
    PlacedComponent c;
    c.patch = gaussian_patch(rl.sigma_v * opts.patch_scale, rl.sigma_h * opts.patch_scale, rl.gain);
    c.rotation_deg = th;
    const double step = cal.pixels_per_frame(rl.velocity_cm_s) * (rl.edge == SectorEdge::Right ? -1.0 : 1.0);
    c.centers.reserve(frames);
    for (std::uint32_t f = 0; f < frames; ++f) {
      c.centers.emplace_back(row, col + step * f);
    }
    return c;
  }
  throw PlacementError("no in-image position found in the " + to_string(rl.edge) + " sub-sector at level " +
                       to_string(rl.level));
}

}  // namespace

PlacedClutter place_nf(const ClutterSpec& spec, const SectorGeometry& geom, std::uint32_t height,
                       std::uint32_t frames, std::uint64_t seed, const PlacementOptions& opts) {
  if (!spec.nf) {
    throw ContractError("place_nf needs NF parameters");
  }
  PlacedClutter p{spec, frames, {}};
  p.components.push_back(nf_component(*spec.nf, geom, height, frames, seed, opts));
  return p;
}

PlacedClutter place_rl(const ClutterSpec& spec, const SectorGeometry& geom, const PhysicalCalibration& cal,
                       std::uint32_t height, std::uint32_t width, std::uint32_t frames, std::uint64_t seed,
                       const PlacementOptions& opts) {
  if (!spec.rl) {
    throw ContractError("place_rl needs RL parameters");
  }
  PlacedClutter p{spec, frames, {}};
  p.components.push_back(rl_component(*spec.rl, geom, cal, height, width, frames, seed, opts));
  return p;
}

PlacedClutter place_clutter(const ClutterSpec& spec, const SectorGeometry& geom, const PhysicalCalibration& cal,
                            std::uint32_t height, std::uint32_t width, std::uint32_t frames, std::uint64_t seed,
                            const PlacementOptions& opts) {
  spec.validate();
  PlacedClutter p{spec, frames, {}};
  if (spec.nf) {
    p.components.push_back(nf_component(*spec.nf, geom, height, frames, derive_seed(seed, {1}), opts));
  }
  if (spec.rl) {
    p.components.push_back(rl_component(*spec.rl, geom, cal, height, width, frames, derive_seed(seed, {2}), opts));
  }
  return p;
}

Volume render_clutter_volume(const PlacedClutter& placed, std::uint32_t height, std::uint32_t width,
                             std::uint32_t frames) {
  if (frames != placed.frames) {
    throw DimensionError("render frames " + std::to_string(frames) + " != placement frames " +
                         std::to_string(placed.frames));
  }
  Volume vol(Dims{height, width, frames});
  auto splat = [&](std::uint32_t f, double y, double x, double v) {
    const double fy = std::floor(y);
    const double fx = std::floor(x);
    const double ty = y - fy;
    const double tx = x - fx;
    const double w[2][2] = {{(1 - ty) * (1 - tx), (1 - ty) * tx}, {ty * (1 - tx), ty * tx}};
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double r = fy + i;
        const double c = fx + j;
        if (r < 0 || c < 0 || r >= height || c >= width || w[i][j] == 0.0) {
          continue;
        }
        vol.at(f, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)) += static_cast<float>(v * w[i][j]);
      }
    }
  };
  for (const auto& comp : placed.components) {
    const double th = deg2rad(comp.rotation_deg);
    const double cs = std::cos(th);
    const double sn = std::sin(th);
    for (std::uint32_t f = 0; f < frames; ++f) {
      const auto [cr, cc] = comp.centers.at(f);
      for (int dv = -comp.patch.half_v; dv <= comp.patch.half_v; ++dv) {
        for (int dh = -comp.patch.half_h; dh <= comp.patch.half_h; ++dh) {
          const double v = comp.patch.at(dv, dh);
          if (v == 0.0) {
            continue;
          }
          const double row = cr + dv * cs - dh * sn;
          const double col = cc + dv * sn + dh * cs;
          // Continuous position -> index space of pixel centers.
          splat(f, row - 0.5, col - 0.5, v);
        }
      }
    }
  }
  return vol;
}

Superimposed superimpose(const Sequence& clean, const Volume& clutter, const SectorGeometry& geom,
                         double mask_threshold) {
  const Dims& d = clean.dims();
  if (!(clutter.dims() == d)) {
    throw DimensionError("clean " + to_string(d) + " vs clutter " + to_string(clutter.dims()));
  }
  const BinaryImage sector = sector_mask(geom, d.height, d.width);
  std::vector<float> out(d.size(), 0.0F);
  BinaryVolume mask{d, std::vector<std::uint8_t>(d.size(), 0)};
  const auto cv = clean.values();
  const auto kv = clutter.values();
  const std::size_t fs = d.frame_size();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!sector.pixels[i % fs]) {
      continue;
    }
    out[i] = std::min(cv[i] + kv[i], 1.0F);
    mask.voxels[i] = kv[i] > mask_threshold ? 1 : 0;
  }
  return {Sequence(d, std::move(out)), std::move(mask)};
}

Sequence rotate_frames(const Sequence& s, std::uint32_t start_frame) {
  const Dims& d = s.dims();
  if (start_frame < 1 || start_frame > d.frames) {
    throw RangeError("start frame " + std::to_string(start_frame) + " outside [1, " + std::to_string(d.frames) + "]");
  }
  std::vector<float> out(d.size());
  const std::size_t fs = d.frame_size();
  for (std::uint32_t j = 0; j < d.frames; ++j) {
    const std::uint32_t src = (j + start_frame - 1) % d.frames;
    const auto frame = s.frame(src);
    std::copy(frame.begin(), frame.end(), out.begin() + static_cast<std::ptrdiff_t>(j * fs));
  }
  return Sequence(d, std::move(out));
}

ShiftedPair time_shift_pair(const Sequence& input, const Sequence& target, double p, std::uint64_t seed) {
  if (input.dims().frames != target.dims().frames) {
    throw DimensionError("time shift needs equal frame counts");
  }
  Rng rng(seed);
  if (!rng.bernoulli(p)) {
    return {input, target, 1, false};
  }
  const auto k = 1 + static_cast<std::uint32_t>(rng.below(input.dims().frames));
  if (k == 1) {
    return {input, target, 1, true};
  }
  return {rotate_frames(input, k), rotate_frames(target, k), k, true};
}

}  // namespace echoclutter
