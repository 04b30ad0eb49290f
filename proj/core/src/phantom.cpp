#include "echoclutter/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "echoclutter/error.hpp"
#include "echoclutter/random.hpp"

namespace echoclutter {

namespace {

constexpr double kSpeckleSmoothing = 0.7;

struct RingFrame {
  double center_row;
  double center_col;
  double radius;
  double half_thickness;
};

RingFrame ring_at(const PhantomConfig& cfg, std::uint32_t frame, std::uint32_t phase) {
  const double R = cfg.geometry.radius;
  const double r0 = cfg.ring_radius * R;
  const double t = static_cast<double>(frame + phase) / static_cast<double>(cfg.cycle_frames);
  const double squeeze = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t));
  return RingFrame{cfg.geometry.apex_row + cfg.ring_center_depth * R, cfg.geometry.apex_col,
                   r0 * (1.0 - cfg.contraction_amplitude * squeeze), 0.5 * cfg.wall_thickness * R};
}

PhantomRegion classify(const RingFrame& ring, double rho) {
  if (std::abs(rho - ring.radius) <= ring.half_thickness) {
    return PhantomRegion::Wall;
  }
  return rho < ring.radius ? PhantomRegion::Cavity : PhantomRegion::Tissue;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * half + 1);
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    k[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + half];
  }
  for (double& v : k) {
    v /= sum;
  }
  return k;
}

// Separable blur with clamp-to-edge borders.
std::vector<double> blur(const std::vector<double>& img, std::uint32_t h, std::uint32_t w, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int half = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(img.size()), out(img.size());
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) {
        const int cc = std::clamp(static_cast<int>(c) + i, 0, static_cast<int>(w) - 1);
        acc += k[i + half] * img[static_cast<std::size_t>(r) * w + cc];
      }
      tmp[static_cast<std::size_t>(r) * w + c] = acc;
    }
  }
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) {
        const int rr = std::clamp(static_cast<int>(r) + i, 0, static_cast<int>(h) - 1);
        acc += k[i + half] * tmp[static_cast<std::size_t>(rr) * w + c];
      }
      out[static_cast<std::size_t>(r) * w + c] = acc;
    }
  }
  return out;
}

// Multiplicative speckle with mean 1: smoothed Rayleigh amplitude of a
// circular Gaussian field, compressed into roughly [0.5, 2].
std::vector<double> speckle_texture(const PhantomConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(cfg.speckle_seed, {seed, 0x5eedULL}));
  const std::size_t n = static_cast<std::size_t>(cfg.height) * cfg.width;
  std::vector<double> re(n), im(n);
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = rng.normal();
    im[i] = rng.normal();
  }
  re = blur(re, cfg.height, cfg.width, kSpeckleSmoothing);
  im = blur(im, cfg.height, cfg.width, kSpeckleSmoothing);
  std::vector<double> amp(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    amp[i] = std::hypot(re[i], im[i]);
    mean += amp[i];
  }
  mean /= static_cast<double>(n);
  for (double& a : amp) {
    a = 0.5 + 0.5 * a / mean;
  }
  return amp;
}

double sample_clamped(const std::vector<double>& img, std::uint32_t h, std::uint32_t w, double row, double col) {
  const double y = std::clamp(row, 0.0, static_cast<double>(h - 1));
  const double x = std::clamp(col, 0.0, static_cast<double>(w - 1));
  const auto r0 = static_cast<std::uint32_t>(std::floor(y));
  const auto c0 = static_cast<std::uint32_t>(std::floor(x));
  const std::uint32_t r1 = std::min(r0 + 1, h - 1);
  const std::uint32_t c1 = std::min(c0 + 1, w - 1);
  const double fy = y - r0;
  const double fx = x - c0;
  auto at = [&](std::uint32_t r, std::uint32_t c) { return img[static_cast<std::size_t>(r) * w + c]; };
  return (1 - fy) * ((1 - fx) * at(r0, c0) + fx * at(r0, c1)) + fy * ((1 - fx) * at(r1, c0) + fx * at(r1, c1));
}

}  // namespace

PhantomConfig PhantomConfig::default_for(std::uint32_t height, std::uint32_t width) {
  PhantomConfig cfg;
  cfg.height = height;
  cfg.width = width;
  cfg.geometry = SectorGeometry::default_for(height, width);
  return cfg;
}

void PhantomConfig::validate() const {
  if (height == 0 || width == 0) {
    throw ParameterError("phantom image dims must be positive");
  }
  geometry.validate();
  if (!(wall_brightness > cavity_brightness)) {
    throw ParameterError("wall brightness must exceed cavity brightness");
  }
  for (double b : {wall_brightness, cavity_brightness, tissue_brightness}) {
    if (!(b >= 0.0 && b <= 1.0)) {
      throw ParameterError("phantom brightness values must lie in [0,1]");
    }
  }
  if (!(contraction_amplitude >= 0.0 && contraction_amplitude < 1.0)) {
    throw ParameterError("contraction amplitude must lie in [0,1)");
  }
  if (cycle_frames == 0) {
    throw ParameterError("cycle_frames must be positive");
  }
}

std::uint32_t phantom_phase_offset(const PhantomConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x9a5eULL}));
  return static_cast<std::uint32_t>(rng.below(cfg.cycle_frames));
}

double phantom_wall_radius(const PhantomConfig& cfg, std::uint32_t frame, std::uint64_t seed) {
  return ring_at(cfg, frame, phantom_phase_offset(cfg, seed)).radius;
}

Sequence generate_phantom(const PhantomConfig& cfg, std::uint32_t frames, std::uint64_t seed) {
  cfg.validate();
  if (frames == 0) {
    throw ParameterError("phantom needs at least one frame");
  }
  const Dims dims{cfg.height, cfg.width, frames};
  const BinaryImage sector = sector_mask(cfg.geometry, cfg.height, cfg.width);
  const auto texture = speckle_texture(cfg, seed);
  const std::uint32_t phase = phantom_phase_offset(cfg, seed);
  const double r_ref = cfg.ring_radius * cfg.geometry.radius;

  std::vector<float> data(dims.size(), 0.0F);
  for (std::uint32_t f = 0; f < frames; ++f) {
    const RingFrame ring = ring_at(cfg, f, phase);
    // Tissue moves radially with the ring, so the texture is sampled at the
    // position each point occupied in the reference (uncontracted) frame.
    const double stretch = r_ref / ring.radius;
    for (std::uint32_t r = 0; r < cfg.height; ++r) {
      for (std::uint32_t c = 0; c < cfg.width; ++c) {
        if (!sector.at(r, c)) {
          continue;
        }
        const double dy = r + 0.5 - ring.center_row;
        const double dx = c + 0.5 - ring.center_col;
        const double rho = std::hypot(dy, dx);
        double base = cfg.tissue_brightness;
        switch (classify(ring, rho)) {
          case PhantomRegion::Wall: base = cfg.wall_brightness; break;
          case PhantomRegion::Cavity: base = cfg.cavity_brightness; break;
          default: break;
        }
        const double speckle = sample_clamped(texture, cfg.height, cfg.width, ring.center_row + dy * stretch - 0.5,
                                              ring.center_col + dx * stretch - 0.5);
        data[(static_cast<std::size_t>(f) * cfg.height + r) * cfg.width + c] =
            static_cast<float>(std::clamp(base * speckle, 0.0, 1.0));
      }
    }
  }
  return Sequence(dims, std::move(data));
}

std::vector<PhantomRegion> phantom_regions(const PhantomConfig& cfg, std::uint32_t frames, std::uint64_t seed) {
  cfg.validate();
  const BinaryImage sector = sector_mask(cfg.geometry, cfg.height, cfg.width);
  const std::uint32_t phase = phantom_phase_offset(cfg, seed);
  std::vector<PhantomRegion> labels(static_cast<std::size_t>(cfg.height) * cfg.width * frames, PhantomRegion::Outside);
  for (std::uint32_t f = 0; f < frames; ++f) {
    const RingFrame ring = ring_at(cfg, f, phase);
    for (std::uint32_t r = 0; r < cfg.height; ++r) {
      for (std::uint32_t c = 0; c < cfg.width; ++c) {
        if (!sector.at(r, c)) {
          continue;
        }
        const double rho = std::hypot(r + 0.5 - ring.center_row, c + 0.5 - ring.center_col);
        labels[(static_cast<std::size_t>(f) * cfg.height + r) * cfg.width + c] = classify(ring, rho);
      }
    }
  }
  return labels;
}

}  // namespace echoclutter
