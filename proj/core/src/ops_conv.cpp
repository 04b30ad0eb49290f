#include <Eigen/Core>
#include <algorithm>
#include <cstring>

#include "echoclutter/error.hpp"
#include "echoclutter/ops.hpp"

namespace echoclutter {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// Padded-input floats (Cin x chunk) touched per GEMM block.
constexpr std::size_t kBlockBudgetFloats = 32 * 1024;
constexpr std::size_t kMinChunk = 128;

// Geometry shared by forward and backward.
//
// The input of one sample is copied into a zero-padded buffer of
// (Cin, Hp, Wp, Fp). An output position (h, w, f) reads the window whose
// top-left corner sits at padded flat offset q = h*Wp*Fp + w*Fp + f, and tap
// (kh, kw, kf) adds the constant offset kh*Wp*Fp + kw*Fp + kf. For a
// contiguous range of q, the inputs seen by one tap are a (Cin x len) block
// of the padded buffer with row stride `plane`, so each tap is one GEMM on a
// strided view and no column matrix is built. Positions with w >= W or
// f >= F are computed and discarded.
struct ConvGeom {
  std::size_t N, Cin, Cout, H, W, F, KH, KW, KF;
  std::size_t Hp, Wp, Fp, plane, nq, taps, chunk;

  ConvGeom(const Shape& xs, const Shape& ws) {
    N = xs[0];
    Cin = xs[1];
    H = xs[2];
    W = xs[3];
    F = xs[4];
    Cout = ws[0];
    KH = ws[2];
    KW = ws[3];
    KF = ws[4];
    Hp = H + KH - 1;
    Wp = W + KW - 1;
    Fp = F + KF - 1;
    plane = Hp * Wp * Fp;
    nq = (H - 1) * Wp * Fp + (W - 1) * Fp + F;
    taps = KH * KW * KF;
    chunk = std::max(kMinChunk, kBlockBudgetFloats / std::max<std::size_t>(Cin, 1));
    chunk = std::min(chunk, nq);
  }

  std::size_t tap_offset(std::size_t t) const {
    const std::size_t kh = t / (KW * KF);
    const std::size_t kw = (t / KF) % KW;
    const std::size_t kf = t % KF;
    return kh * Wp * Fp + kw * Fp + kf;
  }

  // Output coordinate of padded offset q, or false when q is a discarded slot.
  bool valid(std::size_t q, std::size_t& h, std::size_t& w, std::size_t& f) const {
    f = q % Fp;
    w = (q / Fp) % Wp;
    h = q / (Wp * Fp);
    return f < F && w < W;
  }
};

void pad_sample(const ConvGeom& g, const float* x, std::vector<float>& padded) {
  std::fill(padded.begin(), padded.end(), 0.0F);
  const std::size_t ph = g.KH / 2, pw = g.KW / 2, pf = g.KF / 2;
  for (std::size_t c = 0; c < g.Cin; ++c) {
    for (std::size_t h = 0; h < g.H; ++h) {
      for (std::size_t w = 0; w < g.W; ++w) {
        const float* src = x + ((c * g.H + h) * g.W + w) * g.F;
        float* dst = padded.data() + c * g.plane + ((h + ph) * g.Wp + (w + pw)) * g.Fp + pf;
        std::memcpy(dst, src, g.F * sizeof(float));
      }
    }
  }
}

using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Weights regrouped per tap: (taps, Cout, Cin).
std::vector<float> pack_taps(const ConvGeom& g, const Tensor& w) {
  std::vector<float> p(g.taps * g.Cout * g.Cin);
  for (std::size_t co = 0; co < g.Cout; ++co)
    for (std::size_t ci = 0; ci < g.Cin; ++ci)
      for (std::size_t t = 0; t < g.taps; ++t) p[(t * g.Cout + co) * g.Cin + ci] = w[(co * g.Cin + ci) * g.taps + t];
  return p;
}

Tensor conv_forward(const Tensor& x, const Tensor& w, const Tensor* b, const ConvGeom& g) {
  Tensor y(Shape{g.N, g.Cout, g.H, g.W, g.F});
  std::vector<float> padded(g.Cin * g.plane);
  RowMat out(g.Cout, g.chunk);
  const auto wp = pack_taps(g, w);
  const std::size_t out_plane = g.H * g.W * g.F;

  for (std::size_t n = 0; n < g.N; ++n) {
    pad_sample(g, x.data() + n * g.Cin * out_plane, padded);
    float* yn = y.data() + n * g.Cout * out_plane;
    for (std::size_t q0 = 0; q0 < g.nq; q0 += g.chunk) {
      const std::size_t len = std::min(g.chunk, g.nq - q0);
      auto o = out.leftCols(len);
      o.setZero();
      for (std::size_t t = 0; t < g.taps; ++t) {
        ConstRowMap wt(wp.data() + t * g.Cout * g.Cin, g.Cout, g.Cin);
        ConstStridedMap pt(padded.data() + q0 + g.tap_offset(t), g.Cin, len, Eigen::OuterStride<>(g.plane));
        o.noalias() += wt * pt;
      }
      for (std::size_t j = 0; j < len; ++j) {
        std::size_t h, ww, f;
        if (!g.valid(q0 + j, h, ww, f)) continue;
        const std::size_t oo = (h * g.W + ww) * g.F + f;
        for (std::size_t co = 0; co < g.Cout; ++co) {
          yn[co * out_plane + oo] = out(co, j) + (b ? (*b)[co] : 0.0F);
        }
      }
    }
  }
  return y;
}

void conv_backward(const Tensor& x, const Tensor& w, const Tensor& dy, const ConvGeom& g, Tensor* dx, Tensor* dw,
                   Tensor* db) {
  const std::size_t out_plane = g.H * g.W * g.F;
  const auto wp = pack_taps(g, w);
  std::vector<float> padded(g.Cin * g.plane);
  std::vector<float> dpadded(dx ? g.Cin * g.plane : 0);
  RowMat dout(g.Cout, g.chunk);
  std::vector<float> dwp(dw ? g.taps * g.Cout * g.Cin : 0, 0.0F);

  for (std::size_t n = 0; n < g.N; ++n) {
    const float* dyn = dy.data() + n * g.Cout * out_plane;
    if (db) {
      for (std::size_t co = 0; co < g.Cout; ++co) {
        double s = 0.0;
        for (std::size_t i = 0; i < out_plane; ++i) s += dyn[co * out_plane + i];
        (*db)[co] += static_cast<float>(s);
      }
    }
    if (!dx && !dw) continue;
    if (dw) pad_sample(g, x.data() + n * g.Cin * out_plane, padded);
    if (dx) std::fill(dpadded.begin(), dpadded.end(), 0.0F);
    for (std::size_t q0 = 0; q0 < g.nq; q0 += g.chunk) {
      const std::size_t len = std::min(g.chunk, g.nq - q0);
      for (std::size_t j = 0; j < len; ++j) {
        std::size_t h, ww, f;
        if (!g.valid(q0 + j, h, ww, f)) {
          for (std::size_t co = 0; co < g.Cout; ++co) dout(co, j) = 0.0F;
          continue;
        }
        const std::size_t o = (h * g.W + ww) * g.F + f;
        for (std::size_t co = 0; co < g.Cout; ++co) dout(co, j) = dyn[co * out_plane + o];
      }
      const auto d = dout.leftCols(len);
      for (std::size_t t = 0; t < g.taps; ++t) {
        const std::size_t off = q0 + g.tap_offset(t);
        if (dw) {
          RowMap dwt(dwp.data() + t * g.Cout * g.Cin, g.Cout, g.Cin);
          ConstStridedMap pt(padded.data() + off, g.Cin, len, Eigen::OuterStride<>(g.plane));
          dwt.noalias() += d * pt.transpose();
        }
        if (dx) {
          ConstRowMap wt(wp.data() + t * g.Cout * g.Cin, g.Cout, g.Cin);
          StridedMap dpt(dpadded.data() + off, g.Cin, len, Eigen::OuterStride<>(g.plane));
          dpt.noalias() += wt.transpose() * d;
        }
      }
    }
    if (dx) {
      const std::size_t ph = g.KH / 2, pw = g.KW / 2, pf = g.KF / 2;
      float* dxn = dx->data() + n * g.Cin * out_plane;
      for (std::size_t c = 0; c < g.Cin; ++c) {
        for (std::size_t h = 0; h < g.H; ++h) {
          for (std::size_t ww = 0; ww < g.W; ++ww) {
            const float* src = dpadded.data() + c * g.plane + ((h + ph) * g.Wp + (ww + pw)) * g.Fp + pf;
            float* dst = dxn + ((c * g.H + h) * g.W + ww) * g.F;
            for (std::size_t f = 0; f < g.F; ++f) dst[f] += src[f];
          }
        }
      }
    }
  }
  if (dw) {
    for (std::size_t co = 0; co < g.Cout; ++co)
      for (std::size_t ci = 0; ci < g.Cin; ++ci)
        for (std::size_t t = 0; t < g.taps; ++t)
          (*dw)[(co * g.Cin + ci) * g.taps + t] += dwp[(t * g.Cout + co) * g.Cin + ci];
  }
}

Tensor subsample2(const Tensor& y) {
  const auto& s = y.shape();
  Tensor out(Shape{s[0], s[1], (s[2] + 1) / 2, (s[3] + 1) / 2, s[4]});
  for (std::size_t n = 0; n < s[0]; ++n)
    for (std::size_t c = 0; c < s[1]; ++c)
      for (std::size_t h = 0; h < out.dim(2); ++h)
        for (std::size_t w = 0; w < out.dim(3); ++w)
          for (std::size_t f = 0; f < s[4]; ++f) out.at5(n, c, h, w, f) = y.at5(n, c, 2 * h, 2 * w, f);
  return out;
}

Tensor unsubsample2(const Tensor& g, const Shape& full) {
  Tensor out(full);
  for (std::size_t n = 0; n < full[0]; ++n)
    for (std::size_t c = 0; c < full[1]; ++c)
      for (std::size_t h = 0; h < g.dim(2); ++h)
        for (std::size_t w = 0; w < g.dim(3); ++w)
          for (std::size_t f = 0; f < full[4]; ++f) out.at5(n, c, 2 * h, 2 * w, f) = g.at5(n, c, h, w, f);
  return out;
}

}  // namespace

Var conv3d(const Var& x, const Var& weight, const Var& bias, int stride) {
  require_rank(x->value, 5, "conv3d input");
  require_rank(weight->value, 5, "conv3d weight");
  const Shape& ws = weight->shape();
  if (ws[1] != x->shape()[1]) {
    throw DimensionError("conv3d: input has " + std::to_string(x->shape()[1]) + " channels, weight expects " +
                         std::to_string(ws[1]));
  }
  if (ws[2] % 2 == 0 || ws[3] % 2 == 0 || ws[4] % 2 == 0) {
    throw DimensionError("conv3d: kernel extents must be odd, got " + shape_string(ws));
  }
  if (bias && (bias->value.rank() != 1 || bias->value.numel() != ws[0])) {
    throw DimensionError("conv3d: bias shape " + shape_string(bias->shape()) + " for " + std::to_string(ws[0]) +
                         " output channels");
  }
  if (stride != 1 && stride != 2) {
    throw ParameterError("conv3d: stride must be 1 or 2");
  }
  if (x->value.numel() == 0) {
    throw DimensionError("conv3d: empty input");
  }
  const ConvGeom g(x->shape(), ws);
  Tensor y = conv_forward(x->value, weight->value, bias ? &bias->value : nullptr, g);
  const Shape full = y.shape();
  if (stride == 2) y = subsample2(y);

  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(bias);
  return make_result(std::move(y), parents, [x, weight, bias, g, full, stride](Variable& self) {
    const Tensor dy = stride == 2 ? unsubsample2(self.grad, full) : self.grad;
    conv_backward(x->value, weight->value, dy, g, x->requires_grad ? &x->grad_buffer() : nullptr,
                  weight->requires_grad ? &weight->grad_buffer() : nullptr,
                  bias && bias->requires_grad ? &bias->grad_buffer() : nullptr);
  });
}

}  // namespace echoclutter
