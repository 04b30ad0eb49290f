#include "echoclutter/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "echoclutter/clutter.hpp"
#include "echoclutter/codec.hpp"
#include "echoclutter/error.hpp"
#include "echoclutter/filter_net.hpp"
#include "echoclutter/geometry.hpp"
#include "echoclutter/grad_check.hpp"
#include "echoclutter/losses.hpp"
#include "echoclutter/optim.hpp"
#include "echoclutter/random.hpp"
#include "echoclutter/reference.hpp"
#include "echoclutter/svd_filter.hpp"
#include "echoclutter/weights_io.hpp"

namespace echoclutter {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(s));
  for (float& v : t.values()) v = static_cast<float>(scale * rng.normal());
  return t;
}

// Values that are pairwise at least `gap` apart, so a finite-difference step
// never reorders them.
Tensor separated_tensor(Shape s, Rng& rng, float gap) {
  Tensor t(std::move(s));
  std::vector<std::size_t> order(t.numel());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const float offset = -0.5F * gap * static_cast<float>(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) t[order[i]] = offset + gap * static_cast<float>(i);
  return t;
}

Sequence random_sequence(Dims d, Rng& rng) {
  std::vector<float> v(d.size());
  for (float& x : v) x = static_cast<float>(rng.uniform());
  return Sequence(d, std::move(v));
}

// Second sequence correlated with the first, so SSIM lands away from 0.
Sequence perturbed(const Sequence& s, Rng& rng, double noise) {
  std::vector<float> v(s.values().begin(), s.values().end());
  for (float& x : v) x = static_cast<float>(std::clamp(x + noise * rng.normal(), 0.0, 1.0));
  return Sequence(s.dims(), std::move(v));
}

void randomize(ParamStore& store, Rng& rng, double scale) {
  for (const auto& e : store.entries()) {
    if (!e.trainable) continue;
    for (float& v : e.var->value.values()) v = static_cast<float>(scale * rng.normal());
  }
}

std::vector<Var> trainable_vars(const ParamStore& store) {
  std::vector<Var> out;
  for (const auto& e : store.entries()) {
    if (e.trainable) out.push_back(e.var);
  }
  return out;
}

CheckResult check(std::string name, bool ok, std::string detail = {}) {
  return CheckResult{std::move(name), ok, std::move(detail)};
}

CheckResult check_codec(Rng& rng) {
  std::vector<float> v(7 * 5 * 3);
  for (float& x : v) x = static_cast<float>(rng.uniform());
  v[0] = 0.0F;
  v[1] = -0.0F;
  v[2] = std::numeric_limits<float>::denorm_min();
  v[3] = 1.0F;
  v[4] = std::nextafter(1.0F, 0.0F);
  const Sequence s(Dims{7, 5, 3}, v);
  const auto bytes = encode_sequence_bytes(s);
  const Sequence back = decode_sequence_bytes(bytes);
  bool bit_exact = back.dims() == s.dims() && bytes.size() == kStsqHeaderSize + 4 * v.size();
  for (std::size_t i = 0; bit_exact && i < v.size(); ++i) {
    bit_exact = std::signbit(back.values()[i]) == std::signbit(v[i]) && back.values()[i] == v[i];
  }
  bool rejects_truncated = false;
  try {
    decode_sequence_bytes(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 1));
  } catch (const Error&) {
    rejects_truncated = true;
  }
  return check("codec round-trip", bit_exact && rejects_truncated,
               bit_exact ? (rejects_truncated ? "" : "truncated stream accepted") : "payload mismatch");
}

CheckResult check_sector() {
  std::size_t mismatches = 0;
  for (std::uint32_t h : {16U, 33U, 64U, 128U}) {
    for (std::uint32_t w : {16U, 48U, 64U}) {
      const auto g = SectorGeometry::default_for(h, w);
      if (!(sector_mask(g, h, w) == reference::sector_mask(g, h, w))) ++mismatches;
    }
  }
  return check("sector mask oracle", mismatches == 0, std::to_string(mismatches) + " geometries differ");
}

CheckResult check_enumeration() {
  const auto specs = enumerate_pattern_specs();
  std::size_t nf = 0, rl = 0, joint = 0;
  for (const auto& s : specs) {
    if (s.cls == ClutterClass::NF) ++nf;
    if (s.cls == ClutterClass::RL) ++rl;
    if (s.cls == ClutterClass::NFRL) ++joint;
  }
  const bool ok = nf == 18 && rl == 324 && joint == 192 && specs.size() == 534 &&
                  dataset_size(specs.size(), 3, 6, 3) == 28836;
  return check("pattern enumeration", ok,
               std::to_string(nf) + "/" + std::to_string(rl) + "/" + std::to_string(joint) + " total " +
                   std::to_string(specs.size()));
}

CheckResult check_maxpool(const VerifyHooks& hooks, Rng& rng) {
  // Quantized values make ties common.
  Tensor x(Shape{2, 3, 6, 8, 3});
  for (float& v : x.values()) v = static_cast<float>(rng.below(3));
  const Var leaf = make_leaf(x, true);
  const Tensor expect = reference::maxpool(x);
  const auto argmax = reference::maxpool_argmax(x);
  bool values_ok = false;
  bool routes_ok = false;
  {
    const Var y = hooks.maxpool(leaf);
    values_ok = y->value == expect;
    // Gradient of sum(y * r) lands exactly on the oracle's argmax positions.
    Tensor r(y->shape());
    for (std::size_t i = 0; i < r.numel(); ++i) r[i] = static_cast<float>(i + 1);
    const Var proj = sum(mul(y, constant(r)));
    backward(proj);
    Tensor want(x.shape());
    for (std::size_t i = 0; i < argmax.size(); ++i) want[argmax[i]] = r[i];
    routes_ok = leaf->grad == want;
  }
  return check("maxpool oracle", values_ok && routes_ok,
               values_ok ? (routes_ok ? "" : "tie-break differs from first maximum") : "window maxima differ");
}

CheckResult check_ssim(const VerifyHooks& hooks, Rng& rng) {
  const SsimConfig cfg;
  double worst2 = 0.0, worst3 = 0.0, ident = 0.0, asym = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const Sequence a = random_sequence(Dims{32, 32, 12}, rng);
    const Sequence b = perturbed(a, rng, 0.1 + 0.2 * trial);
    worst2 = std::max(worst2, std::abs(hooks.ssim2d(a, b, cfg) - reference::ssim2d(a, b, cfg)));
    worst3 = std::max(worst3, std::abs(hooks.ssim3d(a, b, cfg) - reference::ssim3d(a, b, cfg)));
    ident = std::max({ident, std::abs(hooks.ssim2d(a, a, cfg) - 1.0), std::abs(hooks.ssim3d(a, a, cfg) - 1.0)});
    asym = std::max(asym, std::abs(hooks.ssim3d(a, b, cfg) - hooks.ssim3d(b, a, cfg)));
  }
  const bool ok = worst2 <= 1e-6 && worst3 <= 1e-6 && ident <= 1e-9 && asym <= 1e-12;
  return check("ssim oracle", ok,
               fmt("2d %.3g", worst2) + fmt(" 3d %.3g", worst3) + fmt(" identity %.3g", ident) +
                   fmt(" asymmetry %.3g", asym));
}

CheckResult check_mare(Rng& rng) {
  const Sequence a = random_sequence(Dims{16, 16, 4}, rng);
  const Sequence b = perturbed(a, rng, 0.2);
  const double d = std::abs(mare(a, b) - reference::mare(a, b));
  const bool ok = d <= 1e-9 && mare(a, a) == 0.0;
  return check("mare oracle", ok, fmt("difference %.3g", d));
}

CheckResult check_svd(Rng& rng) {
  // Singular values against the eigen-decomposition oracle.
  double sv_err = 0.0;
  for (int t = 0; t < 5; ++t) {
    CasoratiBlock b{0, 0, 5, 12, std::vector<double>(25 * 12)};
    for (double& v : b.values) v = rng.normal();
    const auto got = singular_values(b);
    const auto want = reference::singular_values(b);
    for (std::size_t i = 0; i < want.size(); ++i) {
      sv_err = std::max(sv_err, std::abs(got[i] - want[i]) / std::max(1.0, want[0]));
    }
  }
  // k = 0 is the identity; a rank-1 block is annihilated by k = 1.
  const Sequence s = random_sequence(Dims{10, 10, 8}, rng);
  const Volume id = svd_filter_volume(s.volume(), SvdFilterConfig{5, 0});
  double id_err = 0.0;
  for (std::size_t i = 0; i < id.size(); ++i) id_err = std::max<double>(id_err, std::abs(id.values()[i] - s.values()[i]));

  Volume rank1(Dims{10, 10, 8});
  for (std::uint32_t f = 0; f < 8; ++f) {
    for (std::uint32_t r = 0; r < 10; ++r) {
      for (std::uint32_t c = 0; c < 10; ++c) {
        rank1.at(f, r, c) = static_cast<float>((0.2 + 0.05 * ((r * 7 + c * 3) % 11)) * (1.0 + 0.1 * f));
      }
    }
  }
  const Volume gone = svd_filter_volume(rank1, SvdFilterConfig{5, 1});
  double residual = 0.0;
  for (float v : gone.values()) residual = std::max<double>(residual, std::abs(v));
  const bool ok = sv_err <= 1e-9 && id_err <= 1e-5 && residual <= 1e-5;
  return check("svd oracle", ok,
               fmt("singular values %.3g", sv_err) + fmt(" identity %.3g", id_err) + fmt(" rank-1 residual %.3g", residual));
}

CheckResult check_weights(std::uint64_t seed) {
  NetConfig cfg;
  cfg.levels = 1;
  cfg.base_channels = 2;
  FilterNet a(cfg, seed);
  Rng rng(derive_seed(seed, {0x77}));
  randomize(a.params(), rng, 1.0);
  const auto bytes = encode_weights(a.params());
  FilterNet b(cfg, seed + 1);
  decode_weights_into(b.params(), bytes);
  const bool same = a.params().snapshot() == b.params().snapshot() && encode_weights(b.params()) == bytes;
  return check("weights round-trip", same);
}

CheckResult check_residual_identity(Rng& rng) {
  NetConfig cfg;
  cfg.levels = 2;
  cfg.base_channels = 4;
  FilterNet net(cfg, 3);
  randomize(net.params(), rng, 0.5);
  net.params().get("final.w")->value.fill(0.0F);
  net.params().get("final.b")->value.fill(0.0F);
  Tensor x = random_tensor(Shape{2, 1, 8, 8, 4}, rng, 3.0);
  x[0] = -0.0F;
  x[1] = 1e-30F;
  NoGradGuard guard;
  const Var y = net.forward(constant(x), Mode::Eval);
  bool exact = y->value.shape() == x.shape();
  for (std::size_t i = 0; exact && i < x.numel(); ++i) exact = y->value[i] == x[i];
  return check("residual identity", exact);
}

CheckResult check_lr_trace() {
  LRSchedulerState s;
  std::vector<double> trace{1.0, 0.9, 0.8};
  for (int i = 0; i < 20; ++i) trace.push_back(0.8);
  std::vector<double> transitions{s.current_lr};
  for (double loss : trace) {
    const double lr = lr_plateau_update(s, loss);
    if (lr != transitions.back()) transitions.push_back(lr);
  }
  const std::vector<double> want{1e-4, 1e-5, 1e-6, 1e-7};
  return check("lr plateau trace", transitions == want, std::to_string(transitions.size()) + " distinct rates");
}

}  // namespace

VerifyHooks VerifyHooks::defaults() {
  VerifyHooks h;
  h.maxpool = [](const Var& x) { return maxpool3d(x); };
  h.ssim2d = [](const Sequence& a, const Sequence& b, const SsimConfig& c) { return echoclutter::ssim2d(a, b, c); };
  h.ssim3d = [](const Sequence& a, const Sequence& b, const SsimConfig& c) { return echoclutter::ssim3d(a, b, c); };
  return h;
}

std::vector<GradResult> gradient_suite(std::uint64_t seed, const VerifyHooks& hooks) {
  std::vector<GradResult> out;
  GradCheckOptions opts;
  opts.seed = derive_seed(seed, {0x6c});
  Rng rng(derive_seed(seed, {0x6d}));
  auto attempt = [&](const char* name, auto&& fn) {
    try {
      out.push_back({name, fn()});
    } catch (const NumericError&) {
      out.push_back({name, std::numeric_limits<double>::infinity()});
    }
  };
  auto run = [&](const char* name, const DifferentiableFn& f, const std::vector<Tensor>& in) {
    attempt(name, [&] { return grad_check(f, in, opts); });
  };

  run("conv3d",
      [](const std::vector<Var>& v) { return conv3d(v[0], v[1], v[2]); },
      {random_tensor({2, 2, 6, 6, 4}, rng), random_tensor({3, 2, 3, 3, 3}, rng, 0.3), random_tensor({3}, rng)});
  run("conv3d stride 2",
      [](const std::vector<Var>& v) { return conv3d(v[0], v[1], v[2], 2); },
      {random_tensor({2, 2, 6, 6, 4}, rng), random_tensor({3, 2, 3, 3, 3}, rng, 0.3), random_tensor({3}, rng)});
  run("batchnorm3d",
      [](const std::vector<Var>& v) {
        Tensor mean(Shape{3}), var(Shape{3}, 1.0F);
        return batchnorm3d(v[0], v[1], v[2], mean, var, Mode::Train);
      },
      {random_tensor({2, 3, 4, 4, 3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)});
  run("maxpool3d", [&](const std::vector<Var>& v) { return hooks.maxpool(v[0]); },
      {separated_tensor({2, 2, 4, 4, 3}, rng, 0.02F)});
  run("upsample3d", [](const std::vector<Var>& v) { return upsample3d(v[0]); }, {random_tensor({2, 2, 3, 3, 2}, rng)});
  run("attention gate",
      [](const std::vector<Var>& v) { return attention_gate_forward(v[0], v[1], v[2], v[3], v[4], v[5], v[6]); },
      {random_tensor({2, 4, 4, 4, 3}, rng), random_tensor({2, 4, 2, 2, 3}, rng), random_tensor({4, 4, 1, 1, 1}, rng, 0.5),
       random_tensor({4, 4, 1, 1, 1}, rng, 0.5), random_tensor({4}, rng, 0.1), random_tensor({1, 4, 1, 1, 1}, rng),
       random_tensor({1}, rng)});
  run("mse", [](const std::vector<Var>& v) { return mse_loss(v[0], v[1]); },
      {random_tensor({2, 1, 4, 4, 3}, rng), random_tensor({2, 1, 4, 4, 3}, rng)});

  {
    PerceptualNet p(derive_seed(seed, {0x70}), 2, true);
    Rng prng(derive_seed(seed, {0x71}));
    randomize(p.net().params(), prng, 0.5);
    p.freeze();
    const Var target = constant(random_tensor({1, 1, 8, 8, 4}, rng));
    run("perceptual loss", [&](const std::vector<Var>& v) { return loss_perceptual(v[0], target, p); },
        {random_tensor({1, 1, 8, 8, 4}, rng)});
  }
  {
    NetConfig cfg;
    cfg.levels = 1;
    cfg.base_channels = 2;
    cfg.dropout_rate = 0.0F;
    FilterNet net(cfg, derive_seed(seed, {0x72}));
    Rng nrng(derive_seed(seed, {0x73}));
    randomize(net.params(), nrng, 0.5);
    const Var x = make_leaf(random_tensor({2, 1, 8, 8, 4}, rng), true);
    const Var target = constant(random_tensor({2, 1, 8, 8, 4}, rng));
    auto leaves = trainable_vars(net.params());
    leaves.push_back(x);
    attempt("tiny network", [&] {
      return grad_check_vars([&] { return mse_loss(net.forward(x, Mode::Train), target); }, leaves, opts);
    });
    net.params().zero_grad();
  }
  return out;
}

std::vector<CheckResult> run_verification(const VerifyHooks& hooks, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x7e}));
  std::vector<CheckResult> out;
  auto guarded = [&](const char* name, auto&& fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back(check(name, false, std::string("threw: ") + e.what()));
    }
  };
  guarded("codec round-trip", [&] { return check_codec(rng); });
  guarded("sector mask oracle", [&] { return check_sector(); });
  guarded("pattern enumeration", [&] { return check_enumeration(); });
  guarded("maxpool oracle", [&] { return check_maxpool(hooks, rng); });
  guarded("gradient suite", [&] {
    std::string detail;
    bool ok = true;
    for (const auto& g : gradient_suite(seed, hooks)) {
      ok = ok && g.error <= kGradTolerance;
      detail += g.op + fmt("=%.2g ", g.error);
    }
    return check("gradient suite", ok, detail);
  });
  guarded("ssim oracle", [&] { return check_ssim(hooks, rng); });
  guarded("mare oracle", [&] { return check_mare(rng); });
  guarded("svd oracle", [&] { return check_svd(rng); });
  guarded("weights round-trip", [&] { return check_weights(seed); });
  guarded("residual identity", [&] { return check_residual_identity(rng); });
  guarded("lr plateau trace", [&] { return check_lr_trace(); });
  return out;
}

}  // namespace echoclutter
