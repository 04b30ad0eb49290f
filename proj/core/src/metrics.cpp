#include "echoclutter/metrics.hpp"

#include <cmath>

#include "echoclutter/error.hpp"

namespace echoclutter {

double mare(const Sequence& reference, const Sequence& test) {
  if (!(reference.dims() == test.dims())) {
    throw DimensionError("mare: " + to_string(reference.dims()) + " vs " + to_string(test.dims()));
  }
  const auto a = reference.values();
  const auto b = test.values();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(255.0 * a[i] - 255.0 * b[i]);
  return s / static_cast<double>(a.size());
}

void SsimConfig::validate() const {
  if (window < 1 || window % 2 == 0) throw ParameterError("ssim window must be odd and positive");
  if (!(gaussian_sigma > 0.0) || !(k1 > 0.0) || !(k2 > 0.0) || !(dynamic_range > 0.0)) {
    throw ParameterError("ssim constants must be positive");
  }
}

std::vector<double> gaussian_window(int n, double sigma) {
  std::vector<double> w(n);
  const double centre = 0.5 * (n - 1);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i] = std::exp(-0.5 * (i - centre) * (i - centre) / (sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace {

// Dense (F, H, W) array of doubles.
struct Grid {
  std::size_t f, h, w;
  std::vector<double> v;
  Grid(std::size_t f_, std::size_t h_, std::size_t w_) : f(f_), h(h_), w(w_), v(f_ * h_ * w_, 0.0) {}
  double& at(std::size_t a, std::size_t b, std::size_t c) { return v[(a * h + b) * w + c]; }
  double at(std::size_t a, std::size_t b, std::size_t c) const { return v[(a * h + b) * w + c]; }
};

// Valid-mode separable correlation with kernels kf (frames), kh (rows), kw (cols).
Grid correlate(const Grid& in, const std::vector<double>& kf, const std::vector<double>& kh,
               const std::vector<double>& kw) {
  Grid a(in.f, in.h, in.w - kw.size() + 1);
  for (std::size_t t = 0; t < a.f; ++t)
    for (std::size_t r = 0; r < a.h; ++r)
      for (std::size_t c = 0; c < a.w; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < kw.size(); ++k) s += kw[k] * in.at(t, r, c + k);
        a.at(t, r, c) = s;
      }
  Grid b(a.f, a.h - kh.size() + 1, a.w);
  for (std::size_t t = 0; t < b.f; ++t)
    for (std::size_t r = 0; r < b.h; ++r)
      for (std::size_t c = 0; c < b.w; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < kh.size(); ++k) s += kh[k] * a.at(t, r + k, c);
        b.at(t, r, c) = s;
      }
  Grid out(b.f - kf.size() + 1, b.h, b.w);
  for (std::size_t t = 0; t < out.f; ++t)
    for (std::size_t r = 0; r < out.h; ++r)
      for (std::size_t c = 0; c < out.w; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < kf.size(); ++k) s += kf[k] * b.at(t + k, r, c);
        out.at(t, r, c) = s;
      }
  return out;
}

Grid scaled_grid(const Sequence& s, const BinaryImage* sector) {
  const Dims& d = s.dims();
  Grid g(d.frames, d.height, d.width);
  const auto vals = s.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const bool inside = !sector || sector->pixels[i % d.frame_size()];
    g.v[i] = inside ? 255.0 * vals[i] : 0.0;
  }
  return g;
}

SsimResult ssim_generic(const Sequence& ref, const Sequence& test, const SsimConfig& cfg, const BinaryImage* sector,
                        bool temporal) {
  cfg.validate();
  const Dims& d = ref.dims();
  if (!(d == test.dims())) {
    throw DimensionError("ssim: " + to_string(d) + " vs " + to_string(test.dims()));
  }
  if (sector && (sector->height != d.height || sector->width != d.width)) {
    throw DimensionError("ssim: sector mask does not match frame size");
  }
  const auto win = static_cast<std::uint32_t>(cfg.window);
  if (d.height < win || d.width < win) {
    throw DimensionError("ssim: " + std::to_string(win) + "x" + std::to_string(win) + " window does not fit " +
                         to_string(d));
  }
  const int tw = temporal ? static_cast<int>(std::min<std::uint32_t>(win, d.frames)) : 1;
  const auto ks = gaussian_window(cfg.window, cfg.gaussian_sigma);
  const auto kf = gaussian_window(tw, cfg.gaussian_sigma);

  const Grid x = scaled_grid(ref, sector);
  const Grid y = scaled_grid(test, sector);
  Grid xx(x.f, x.h, x.w), yy(x.f, x.h, x.w), xy(x.f, x.h, x.w), nz(x.f, x.h, x.w);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    xx.v[i] = x.v[i] * x.v[i];
    yy.v[i] = y.v[i] * y.v[i];
    xy.v[i] = x.v[i] * y.v[i];
    nz.v[i] = (x.v[i] != 0.0 || y.v[i] != 0.0) ? 1.0 : 0.0;
  }
  const Grid mx = correlate(x, kf, ks, ks);
  const Grid my = correlate(y, kf, ks, ks);
  const Grid sxx = correlate(xx, kf, ks, ks);
  const Grid syy = correlate(yy, kf, ks, ks);
  const Grid sxy = correlate(xy, kf, ks, ks);
  const std::vector<double> box_s(cfg.window, 1.0), box_f(tw, 1.0);
  const Grid count = correlate(nz, box_f, box_s, box_s);

  const double c1 = cfg.c1(), c2 = cfg.c2();
  SsimResult r;
  r.temporal_window = tw;
  double total = 0.0;
  for (std::size_t i = 0; i < mx.v.size(); ++i) {
    if (count.v[i] == 0.0) {
      ++r.patches_excluded;
      continue;
    }
    const double mux = mx.v[i], muy = my.v[i];
    const double vx = sxx.v[i] - mux * mux;
    const double vy = syy.v[i] - muy * muy;
    const double cov = sxy.v[i] - mux * muy;
    total += ((2.0 * mux * muy + c1) * (2.0 * cov + c2)) / ((mux * mux + muy * muy + c1) * (vx + vy + c2));
    ++r.patches_included;
  }
  if (r.patches_included == 0) {
    throw UndefinedMetricError("ssim undefined: every patch pair is entirely zero");
  }
  r.value = total / static_cast<double>(r.patches_included);
  return r;
}

}  // namespace

SsimResult ssim2d_detail(const Sequence& reference, const Sequence& test, const SsimConfig& cfg,
                         const BinaryImage* sector) {
  return ssim_generic(reference, test, cfg, sector, false);
}

SsimResult ssim3d_detail(const Sequence& reference, const Sequence& test, const SsimConfig& cfg,
                         const BinaryImage* sector) {
  return ssim_generic(reference, test, cfg, sector, true);
}

}  // namespace echoclutter
