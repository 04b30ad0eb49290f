#include <algorithm>
#include <cmath>

#include "echoclutter/error.hpp"
#include "echoclutter/ops.hpp"
#include "echoclutter/random.hpp"

namespace echoclutter {

namespace {

void require_even_hw(const Tensor& t, const char* what) {
  require_rank(t, 5, what);
  if (t.dim(2) % 2 != 0 || t.dim(3) % 2 != 0) {
    throw DimensionError(std::string(what) + ": H and W must be even, got " + shape_string(t.shape()));
  }
}

template <typename Fn>
Var unary(const Var& x, Tensor y, Fn&& local_grad) {
  return make_result(std::move(y), {x}, [x, local_grad](Variable& self) {
    if (!x->requires_grad) return;
    float* gx = x->grad_buffer().data();
    const float* g = self.grad.data();
    const std::size_t n = self.grad.numel();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * local_grad(i, self);
  });
}

}  // namespace

Var maxpool3d(const Var& x) {
  require_even_hw(x->value, "maxpool3d");
  const auto& s = x->shape();
  const std::size_t N = s[0], C = s[1], H = s[2], W = s[3], F = s[4];
  Tensor y(Shape{N, C, H / 2, W / 2, F});
  std::vector<std::uint32_t> arg(y.numel());
  const Tensor& xv = x->value;
  std::size_t o = 0;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H / 2; ++h)
        for (std::size_t w = 0; w < W / 2; ++w)
          for (std::size_t f = 0; f < F; ++f, ++o) {
            // Row-major window order; strict '>' keeps the first maximum.
            std::size_t best = xv.offset5(n, c, 2 * h, 2 * w, f);
            for (std::size_t dh = 0; dh < 2; ++dh)
              for (std::size_t dw = 0; dw < 2; ++dw) {
                const std::size_t i = xv.offset5(n, c, 2 * h + dh, 2 * w + dw, f);
                if (xv[i] > xv[best]) best = i;
              }
            y[o] = xv[best];
            arg[o] = static_cast<std::uint32_t>(best);
          }
  if (BranchLog* log = BranchScope::current()) {
    if (log->replaying) {
      arg = log->next(arg.size());
      for (std::size_t i = 0; i < arg.size(); ++i) y[i] = xv[arg[i]];
    } else {
      log->decisions.push_back(arg);
    }
  }
  return make_result(std::move(y), {x}, [x, arg = std::move(arg)](Variable& self) {
    if (!x->requires_grad) return;
    Tensor& gx = x->grad_buffer();
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += self.grad[i];
  });
}

Var avgpool3d(const Var& x) {
  require_even_hw(x->value, "avgpool3d");
  const auto& s = x->shape();
  const std::size_t N = s[0], C = s[1], H = s[2], W = s[3], F = s[4];
  Tensor y(Shape{N, C, H / 2, W / 2, F});
  const Tensor& xv = x->value;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H / 2; ++h)
        for (std::size_t w = 0; w < W / 2; ++w)
          for (std::size_t f = 0; f < F; ++f)
            y.at5(n, c, h, w, f) = 0.25F * (xv.at5(n, c, 2 * h, 2 * w, f) + xv.at5(n, c, 2 * h, 2 * w + 1, f) +
                                            xv.at5(n, c, 2 * h + 1, 2 * w, f) + xv.at5(n, c, 2 * h + 1, 2 * w + 1, f));
  return make_result(std::move(y), {x}, [x](Variable& self) {
    if (!x->requires_grad) return;
    Tensor& gx = x->grad_buffer();
    const auto& s = gx.shape();
    for (std::size_t n = 0; n < s[0]; ++n)
      for (std::size_t c = 0; c < s[1]; ++c)
        for (std::size_t h = 0; h < s[2]; ++h)
          for (std::size_t w = 0; w < s[3]; ++w)
            for (std::size_t f = 0; f < s[4]; ++f) gx.at5(n, c, h, w, f) += 0.25F * self.grad.at5(n, c, h / 2, w / 2, f);
  });
}

Var upsample3d(const Var& x) {
  require_rank(x->value, 5, "upsample3d");
  const auto& s = x->shape();
  const std::size_t N = s[0], C = s[1], H = s[2], W = s[3], F = s[4];
  Tensor y(Shape{N, C, 2 * H, 2 * W, F});
  const std::size_t row = 2 * W * F;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h) {
        float* dst = &y.at5(n, c, 2 * h, 0, 0);
        const float* src = &x->value.at5(n, c, h, 0, 0);
        for (std::size_t w = 0; w < W; ++w)
          for (std::size_t f = 0; f < F; ++f) dst[2 * w * F + f] = dst[(2 * w + 1) * F + f] = src[w * F + f];
        std::copy_n(dst, row, dst + row);
      }
  return make_result(std::move(y), {x}, [x](Variable& self) {
    if (!x->requires_grad) return;
    Tensor& gx = x->grad_buffer();
    const auto& s = self.grad.shape();
    const std::size_t F = s[4];
    for (std::size_t n = 0; n < s[0]; ++n)
      for (std::size_t c = 0; c < s[1]; ++c)
        for (std::size_t h = 0; h < s[2]; ++h)
          for (std::size_t w = 0; w < s[3]; ++w) {
            float* d = &gx.at5(n, c, h / 2, w / 2, 0);
            const float* g = &self.grad.at5(n, c, h, w, 0);
            for (std::size_t f = 0; f < F; ++f) d[f] += g[f];
          }
  });
}

Var batchnorm3d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
                Mode mode) {
  require_rank(x->value, 5, "batchnorm3d");
  const auto& s = x->shape();
  const std::size_t N = s[0], C = s[1], inner = s[2] * s[3] * s[4];
  for (const Tensor* t : {&gamma->value, &beta->value, &running_mean, &running_var}) {
    if (t->numel() != C) {
      throw DimensionError("batchnorm3d: per-channel parameter of length " + std::to_string(t->numel()) + " for " +
                           std::to_string(C) + " channels");
    }
  }
  const std::size_t m = N * inner;
  std::vector<float> mu(C), inv_std(C);
  if (mode == Mode::Train) {
    for (std::size_t c = 0; c < C; ++c) {
      double sum = 0.0, sq = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const float* p = x->value.data() + (n * C + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          sum += p[i];
          sq += static_cast<double>(p[i]) * p[i];
        }
      }
      const double mean = sum / m;
      const double var = std::max(0.0, sq / m - mean * mean);
      mu[c] = static_cast<float>(mean);
      inv_std[c] = static_cast<float>(1.0 / std::sqrt(var + kBatchNormEps));
      running_mean[c] = (1.0F - kBatchNormUpdate) * running_mean[c] + kBatchNormUpdate * static_cast<float>(mean);
      running_var[c] = (1.0F - kBatchNormUpdate) * running_var[c] + kBatchNormUpdate * static_cast<float>(var);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mu[c] = running_mean[c];
      inv_std[c] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + kBatchNormEps));
    }
  }
  Tensor xhat(s);
  Tensor y(s);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (n * C + c) * inner;
      const float mc = mu[c], sc = inv_std[c], gc = gamma->value[c], bc = beta->value[c];
      const float* xp = x->value.data() + base;
      float* hp = xhat.data() + base;
      float* yp = y.data() + base;
      for (std::size_t i = 0; i < inner; ++i) {
        const float h = (xp[i] - mc) * sc;
        hp[i] = h;
        yp[i] = gc * h + bc;
      }
    }
  return make_result(std::move(y), {x, gamma, beta},
                     [x, gamma, beta, xhat = std::move(xhat), inv_std, mode, N, C, inner](Variable& self) {
                       const Tensor& dy = self.grad;
                       const std::size_t m = N * inner;
                       for (std::size_t c = 0; c < C; ++c) {
                         double sdy = 0.0, sdyx = 0.0;
                         for (std::size_t n = 0; n < N; ++n) {
                           const float* dp = dy.data() + (n * C + c) * inner;
                           const float* hp = xhat.data() + (n * C + c) * inner;
                           for (std::size_t i = 0; i < inner; ++i) {
                             sdy += dp[i];
                             sdyx += static_cast<double>(dp[i]) * hp[i];
                           }
                         }
                         if (gamma->requires_grad) gamma->grad_buffer()[c] += static_cast<float>(sdyx);
                         if (beta->requires_grad) beta->grad_buffer()[c] += static_cast<float>(sdy);
                         if (!x->requires_grad) continue;
                         float* gx = x->grad_buffer().data();
                         const float g = gamma->value[c] * inv_std[c];
                         const bool train = mode == Mode::Train;
                         const auto mean_dy = static_cast<float>(train ? sdy / m : 0.0);
                         const auto mean_dyx = static_cast<float>(train ? sdyx / m : 0.0);
                         for (std::size_t n = 0; n < N; ++n) {
                           const std::size_t base = (n * C + c) * inner;
                           const float* dp = dy.data() + base;
                           const float* hp = xhat.data() + base;
                           float* gp = gx + base;
                           for (std::size_t i = 0; i < inner; ++i) {
                             gp[i] += g * (dp[i] - mean_dy - hp[i] * mean_dyx);
                           }
                         }
                       }
                     });
}

Var relu(const Var& x) {
  Tensor y = x->value;
  if (BranchLog* log = BranchScope::current(); log && log->replaying) {
    const auto& on = log->next(y.numel());
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = on[i] ? y[i] : 0.0F;
  } else {
    std::vector<std::uint32_t> on(log ? y.numel() : 0);
    for (std::size_t i = 0; i < y.numel(); ++i) {
      if (log) on[i] = y[i] > 0.0F;
      y[i] = y[i] > 0.0F ? y[i] : 0.0F;
    }
    if (log) log->decisions.push_back(std::move(on));
  }
  return make_result(std::move(y), {x}, [x](Variable& self) {
    if (!x->requires_grad) return;
    float* gx = x->grad_buffer().data();
    const float* g = self.grad.data();
    const float* yv = self.value.data();
    const std::size_t n = self.grad.numel();
    for (std::size_t i = 0; i < n; ++i) gx[i] += yv[i] > 0.0F ? g[i] : 0.0F;
  });
}

Var sigmoid(const Var& x) {
  Tensor y = x->value;
  for (float& v : y.values()) v = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
  return unary(x, std::move(y), [](std::size_t i, const Variable& self) {
    const float s = self.value[i];
    return s * (1.0F - s);
  });
}

Var dropout(const Var& x, float rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0F && rate < 1.0F)) {
    throw ParameterError("dropout rate must lie in [0,1)");
  }
  if (mode == Mode::Eval || rate == 0.0F) {
    return x;
  }
  Rng rng(seed);
  const float keep_scale = 1.0F / (1.0F - rate);
  // Two 32-bit uniforms per engine draw.
  const auto threshold = static_cast<std::uint64_t>(std::ldexp(static_cast<double>(rate), 32));
  std::vector<float> mask(x->value.numel());
  for (std::size_t i = 0; i < mask.size(); i += 2) {
    const std::uint64_t u = rng.next_u64();
    mask[i] = (u >> 32) < threshold ? 0.0F : keep_scale;
    if (i + 1 < mask.size()) mask[i + 1] = (u & 0xffffffffULL) < threshold ? 0.0F : keep_scale;
  }
  Tensor y = x->value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= mask[i];
  return unary(x, std::move(y), [mask = std::move(mask)](std::size_t i, const Variable&) { return mask[i]; });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "add");
  Tensor y = a->value;
  y.add_(b->value);
  return make_result(std::move(y), {a, b}, [a, b](Variable& self) {
    if (a->requires_grad) a->accumulate(self.grad);
    if (b->requires_grad) b->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "sub");
  Tensor y = a->value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] -= b->value[i];
  return make_result(std::move(y), {a, b}, [a, b](Variable& self) {
    if (a->requires_grad) a->accumulate(self.grad);
    if (b->requires_grad) {
      Tensor& gb = b->grad_buffer();
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "mul");
  Tensor y = a->value;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= b->value[i];
  return make_result(std::move(y), {a, b}, [a, b](Variable& self) {
    if (a->requires_grad) {
      Tensor& g = a->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * a->value[i];
    }
  });
}

Var scale(const Var& x, float s) {
  Tensor y = x->value;
  for (float& v : y.values()) v *= s;
  return unary(x, std::move(y), [s](std::size_t, const Variable&) { return s; });
}

Var mul_channels(const Var& x, const Var& a) {
  require_rank(x->value, 5, "mul_channels");
  require_rank(a->value, 5, "mul_channels gate");
  const auto& s = x->shape();
  const auto& sa = a->shape();
  if (sa[0] != s[0] || sa[1] != 1 || sa[2] != s[2] || sa[3] != s[3] || sa[4] != s[4]) {
    throw DimensionError("mul_channels: gate " + shape_string(sa) + " does not broadcast to " + shape_string(s));
  }
  const std::size_t C = s[1], inner = s[2] * s[3] * s[4];
  Tensor y = x->value;
  for (std::size_t n = 0; n < s[0]; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < inner; ++i) y[(n * C + c) * inner + i] *= a->value[n * inner + i];
  return make_result(std::move(y), {x, a}, [x, a, C, inner](Variable& self) {
    const std::size_t N = self.grad.dim(0);
    const float* g = self.grad.data();
    const float* av = a->value.data();
    const float* xv = x->value.data();
    float* gx = x->requires_grad ? x->grad_buffer().data() : nullptr;
    float* ga = a->requires_grad ? a->grad_buffer().data() : nullptr;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t k0 = (n * C + c) * inner;
        if (gx)
          for (std::size_t i = 0; i < inner; ++i) gx[k0 + i] += g[k0 + i] * av[n * inner + i];
        if (ga)
          for (std::size_t i = 0; i < inner; ++i) ga[n * inner + i] += g[k0 + i] * xv[k0 + i];
      }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  require_rank(a->value, 5, "concat_channels");
  require_rank(b->value, 5, "concat_channels");
  const auto& sa = a->shape();
  const auto& sb = b->shape();
  if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3] || sa[4] != sb[4]) {
    throw DimensionError("concat_channels: " + shape_string(sa) + " vs " + shape_string(sb));
  }
  const std::size_t inner = sa[2] * sa[3] * sa[4];
  const std::size_t ca = sa[1] * inner, cb = sb[1] * inner;
  Tensor y(Shape{sa[0], sa[1] + sb[1], sa[2], sa[3], sa[4]});
  for (std::size_t n = 0; n < sa[0]; ++n) {
    std::copy_n(a->value.data() + n * ca, ca, y.data() + n * (ca + cb));
    std::copy_n(b->value.data() + n * cb, cb, y.data() + n * (ca + cb) + ca);
  }
  return make_result(std::move(y), {a, b}, [a, b, ca, cb](Variable& self) {
    const std::size_t N = self.grad.dim(0);
    for (std::size_t n = 0; n < N; ++n) {
      const float* g = self.grad.data() + n * (ca + cb);
      if (a->requires_grad) {
        float* d = a->grad_buffer().data() + n * ca;
        for (std::size_t i = 0; i < ca; ++i) d[i] += g[i];
      }
      if (b->requires_grad) {
        float* d = b->grad_buffer().data() + n * cb;
        for (std::size_t i = 0; i < cb; ++i) d[i] += g[ca + i];
      }
    }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (float v : x->value.values()) s += v;
  return make_result(Tensor::scalar(static_cast<float>(s)), {x}, [x](Variable& self) {
    if (!x->requires_grad) return;
    for (float& g : x->grad_buffer().values()) g += self.grad[0];
  });
}

Var mean(const Var& x) {
  const std::size_t n = x->value.numel();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  double s = 0.0;
  for (float v : x->value.values()) s += v;
  return make_result(Tensor::scalar(static_cast<float>(s / n)), {x}, [x, n](Variable& self) {
    if (!x->requires_grad) return;
    const float g = self.grad[0] / static_cast<float>(n);
    for (float& v : x->grad_buffer().values()) v += g;
  });
}

Var mse_loss(const Var& pred, const Var& target) {
  require_same_shape(pred->value, target->value, "mse_loss");
  const std::size_t n = pred->value.numel();
  if (n == 0) throw DimensionError("mse_loss of empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred->value[i]) - target->value[i];
    s += d * d;
  }
  return make_result(Tensor::scalar(static_cast<float>(s / n)), {pred, target}, [pred, target, n](Variable& self) {
    const float k = 2.0F * self.grad[0] / static_cast<float>(n);
    const float* p = pred->value.data();
    const float* t = target->value.data();
    float* gp = pred->requires_grad ? pred->grad_buffer().data() : nullptr;
    float* gt = target->requires_grad ? target->grad_buffer().data() : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      const float d = p[i] - t[i];
      if (gp) gp[i] += k * d;
      if (gt) gt[i] -= k * d;
    }
  });
}

Var bce_with_logits(const Var& logits, float label) {
  const std::size_t n = logits->value.numel();
  if (n == 0) throw DimensionError("bce_with_logits of an empty tensor");
  std::vector<double> prob(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logits->value[i])));
    prob[i] = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    s -= label * std::log(prob[i]) + (1.0 - label) * std::log(1.0 - prob[i]);
  }
  return make_result(Tensor::scalar(static_cast<float>(s / n)), {logits},
                     [logits, label, n, prob = std::move(prob)](Variable& self) {
                       if (!logits->requires_grad) return;
                       Tensor& g = logits->grad_buffer();
                       for (std::size_t i = 0; i < n; ++i) {
                         // Clamped probabilities are constant, so they pass no gradient.
                         if (prob[i] <= kProbFloor || prob[i] >= 1.0 - kProbFloor) continue;
                         g[i] += static_cast<float>(self.grad[0] * (prob[i] - label) / n);
                       }
                     });
}

Var global_avg_pool(const Var& x) {
  require_rank(x->value, 5, "global_avg_pool");
  const auto& s = x->shape();
  const std::size_t N = s[0], C = s[1], inner = s[2] * s[3] * s[4];
  Tensor y(Shape{N, C});
  for (std::size_t k = 0; k < N * C; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inner; ++i) acc += x->value[k * inner + i];
    y[k] = static_cast<float>(acc / inner);
  }
  return make_result(std::move(y), {x}, [x, N, C, inner](Variable& self) {
    if (!x->requires_grad) return;
    Tensor& g = x->grad_buffer();
    for (std::size_t k = 0; k < N * C; ++k) {
      const float d = self.grad[k] / static_cast<float>(inner);
      for (std::size_t i = 0; i < inner; ++i) g[k * inner + i] += d;
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x->value, 2, "linear input");
  require_rank(weight->value, 2, "linear weight");
  const std::size_t N = x->shape()[0], In = x->shape()[1], Out = weight->shape()[0];
  if (weight->shape()[1] != In || bias->value.numel() != Out) {
    throw DimensionError("linear: weight " + shape_string(weight->shape()) + " / bias " +
                         shape_string(bias->shape()) + " for input " + shape_string(x->shape()));
  }
  Tensor y(Shape{N, Out});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < Out; ++o) {
      double acc = bias->value[o];
      for (std::size_t i = 0; i < In; ++i) acc += static_cast<double>(weight->value[o * In + i]) * x->value[n * In + i];
      y[n * Out + o] = static_cast<float>(acc);
    }
  return make_result(std::move(y), {x, weight, bias}, [x, weight, bias, N, In, Out](Variable& self) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t o = 0; o < Out; ++o) {
        const float g = self.grad[n * Out + o];
        if (bias->requires_grad) bias->grad_buffer()[o] += g;
        for (std::size_t i = 0; i < In; ++i) {
          if (weight->requires_grad) weight->grad_buffer()[o * In + i] += g * x->value[n * In + i];
          if (x->requires_grad) x->grad_buffer()[n * In + i] += g * weight->value[o * In + i];
        }
      }
  });
}

}  // namespace echoclutter
