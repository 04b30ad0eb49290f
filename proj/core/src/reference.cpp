#include "echoclutter/reference.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "echoclutter/error.hpp"

namespace echoclutter::reference {

BinaryImage sector_mask(const SectorGeometry& g, std::uint32_t height, std::uint32_t width) {
  BinaryImage m{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 0)};
  if (!(g.half_angle_deg > 0.0 && g.half_angle_deg < 90.0 && g.radius > 0.0)) return m;
  for (std::uint32_t r = 0; r < height; ++r) {
    for (std::uint32_t c = 0; c < width; ++c) {
      const double down = r + 0.5 - g.apex_row;
      const double across = c + 0.5 - g.apex_col;
      // Angle measured from the downward axis.
      const double angle = std::atan2(std::abs(across), down) * 180.0 / std::numbers::pi;
      const bool inside = down >= 0.0 && std::hypot(down, across) <= g.radius * (1.0 + 5e-13) &&
                          angle <= g.half_angle_deg + 1e-9;
      m.pixels[static_cast<std::size_t>(r) * width + c] = inside ? 1 : 0;
    }
  }
  return m;
}

double mare(const Sequence& a, const Sequence& b) {
  const Dims& d = a.dims();
  if (!(d == b.dims())) throw DimensionError("reference mare: dims differ");
  double s = 0.0;
  for (std::uint32_t f = 0; f < d.frames; ++f)
    for (std::uint32_t r = 0; r < d.height; ++r)
      for (std::uint32_t c = 0; c < d.width; ++c) {
        const double x = static_cast<double>(a.at(f, r, c)) * 255.0;
        const double y = static_cast<double>(b.at(f, r, c)) * 255.0;
        s += std::abs(x - y);
      }
  return s / (static_cast<double>(d.height) * d.width * d.frames);
}

namespace {

double ssim_direct(const Sequence& a, const Sequence& b, const SsimConfig& cfg, const BinaryImage* sector,
                   int tw) {
  const Dims& d = a.dims();
  const int win = cfg.window;
  auto val = [&](const Sequence& s, std::uint32_t f, std::uint32_t r, std::uint32_t c) {
    if (sector && !sector->at(r, c)) return 0.0;
    return 255.0 * s.at(f, r, c);
  };
  std::vector<double> gs(win), gt(tw);
  double ns = 0.0, nt = 0.0;
  for (int i = 0; i < win; ++i) {
    const double o = i - (win - 1) / 2.0;
    gs[i] = std::exp(-o * o / (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma));
    ns += gs[i];
  }
  for (int i = 0; i < tw; ++i) {
    const double o = i - (tw - 1) / 2.0;
    gt[i] = std::exp(-o * o / (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma));
    nt += gt[i];
  }
  const double c1 = std::pow(cfg.k1 * cfg.dynamic_range, 2);
  const double c2 = std::pow(cfg.k2 * cfg.dynamic_range, 2);
  double total = 0.0;
  std::size_t used = 0;
  for (std::uint32_t f0 = 0; f0 + tw <= d.frames; ++f0)
    for (std::uint32_t r0 = 0; r0 + win <= d.height; ++r0)
      for (std::uint32_t c0 = 0; c0 + win <= d.width; ++c0) {
        bool any = false;
        double mx = 0, my = 0;
        for (int t = 0; t < tw; ++t)
          for (int i = 0; i < win; ++i)
            for (int j = 0; j < win; ++j) {
              const double w = gt[t] * gs[i] * gs[j] / (nt * ns * ns);
              const double x = val(a, f0 + t, r0 + i, c0 + j);
              const double y = val(b, f0 + t, r0 + i, c0 + j);
              any = any || x != 0.0 || y != 0.0;
              mx += w * x;
              my += w * y;
            }
        if (!any) continue;
        double vx = 0, vy = 0, cv = 0;
        for (int t = 0; t < tw; ++t)
          for (int i = 0; i < win; ++i)
            for (int j = 0; j < win; ++j) {
              const double w = gt[t] * gs[i] * gs[j] / (nt * ns * ns);
              const double x = val(a, f0 + t, r0 + i, c0 + j) - mx;
              const double y = val(b, f0 + t, r0 + i, c0 + j) - my;
              vx += w * x * x;
              vy += w * y * y;
              cv += w * x * y;
            }
        const double l = (2 * mx * my + c1) / (mx * mx + my * my + c1);
        const double cs = (2 * cv + c2) / (vx + vy + c2);
        total += l * cs;
        ++used;
      }
  if (used == 0) throw UndefinedMetricError("reference ssim: no patch included");
  return total / static_cast<double>(used);
}

}  // namespace

double ssim2d(const Sequence& a, const Sequence& b, const SsimConfig& cfg, const BinaryImage* sector) {
  return ssim_direct(a, b, cfg, sector, 1);
}

double ssim3d(const Sequence& a, const Sequence& b, const SsimConfig& cfg, const BinaryImage* sector) {
  return ssim_direct(a, b, cfg, sector, static_cast<int>(std::min<std::uint32_t>(cfg.window, a.dims().frames)));
}

Tensor maxpool(const Tensor& x) {
  const auto& s = x.shape();
  Tensor y(Shape{s[0], s[1], s[2] / 2, s[3] / 2, s[4]});
  for (std::size_t n = 0; n < s[0]; ++n)
    for (std::size_t c = 0; c < s[1]; ++c)
      for (std::size_t h = 0; h < s[2] / 2; ++h)
        for (std::size_t w = 0; w < s[3] / 2; ++w)
          for (std::size_t f = 0; f < s[4]; ++f) {
            const float v[4] = {x.at5(n, c, 2 * h, 2 * w, f), x.at5(n, c, 2 * h, 2 * w + 1, f),
                                x.at5(n, c, 2 * h + 1, 2 * w, f), x.at5(n, c, 2 * h + 1, 2 * w + 1, f)};
            y.at5(n, c, h, w, f) = *std::max_element(v, v + 4);
          }
  return y;
}

std::vector<std::size_t> maxpool_argmax(const Tensor& x) {
  const auto& s = x.shape();
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < s[0]; ++n)
    for (std::size_t c = 0; c < s[1]; ++c)
      for (std::size_t h = 0; h < s[2] / 2; ++h)
        for (std::size_t w = 0; w < s[3] / 2; ++w)
          for (std::size_t f = 0; f < s[4]; ++f) {
            const std::size_t cand[4] = {x.offset5(n, c, 2 * h, 2 * w, f), x.offset5(n, c, 2 * h, 2 * w + 1, f),
                                         x.offset5(n, c, 2 * h + 1, 2 * w, f),
                                         x.offset5(n, c, 2 * h + 1, 2 * w + 1, f)};
            float best = x[cand[0]];
            for (std::size_t k : cand) best = std::max(best, x[k]);
            for (std::size_t k : cand) {
              if (x[k] == best) {
                out.push_back(k);
                break;
              }
            }
          }
  return out;
}

std::vector<double> singular_values(const CasoratiBlock& b) {
  const std::size_t rows = static_cast<std::size_t>(b.roi) * b.roi;
  Eigen::MatrixXd a(rows, b.frames);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t f = 0; f < b.frames; ++f) a(i, f) = b.values[i * b.frames + f];
  // Gram matrix on the smaller side.
  const Eigen::MatrixXd g = rows >= b.frames ? Eigen::MatrixXd(a.transpose() * a) : Eigen::MatrixXd(a * a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
  std::vector<double> s;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) s.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(i))));
  std::sort(s.rbegin(), s.rend());
  return s;
}

}  // namespace echoclutter::reference
