#include "echoclutter/discriminator.hpp"

#include <cmath>

#include "echoclutter/error.hpp"
#include "echoclutter/random.hpp"

namespace echoclutter {

namespace {

Tensor uniform_init(const Shape& shape, std::size_t fan_in, std::uint64_t seed) {
  Tensor t(shape);
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

Discriminator::Discriminator(DiscriminatorConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.base_channels < 1 || cfg_.blocks < 1) {
    throw ParameterError("discriminator needs base_channels >= 1 and blocks >= 1");
  }
  const std::size_t k = cfg_.temporal_kernels ? 3 : 1;
  std::uint64_t counter = 0;
  auto conv = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t ks, std::size_t kf) {
    params_.add(name + ".w", uniform_init({out, in, ks, ks, kf}, in * ks * ks * kf, derive_seed(seed, {++counter})));
    params_.add(name + ".b", Tensor(Shape{out}));
  };
  auto bn = [&](const std::string& name, std::size_t ch) {
    params_.add(name + ".gamma", Tensor(Shape{ch}, 1.0F));
    params_.add(name + ".beta", Tensor(Shape{ch}));
    params_.add(name + ".mean", Tensor(Shape{ch}), false);
    params_.add(name + ".var", Tensor(Shape{ch}, 1.0F), false);
  };
  std::size_t ch = static_cast<std::size_t>(cfg_.base_channels);
  conv("stem.conv", 1, ch, 3, k);
  bn("stem.bn", ch);
  for (int b = 0; b < cfg_.blocks; ++b) {
    const std::string p = "res" + std::to_string(b);
    const std::size_t out = 2 * ch;
    conv(p + ".conv1", ch, out, 3, k);
    bn(p + ".bn1", out);
    conv(p + ".conv2", out, out, 3, k);
    bn(p + ".bn2", out);
    conv(p + ".short", ch, out, 1, 1);
    ch = out;
  }
  params_.add("head.w", uniform_init({1, ch}, ch, derive_seed(seed, {++counter})));
  params_.add("head.b", Tensor(Shape{1}));
}

Var Discriminator::forward(const Var& x, Mode mode) {
  require_rank(x->value, 5, "discriminator input");
  auto cbn = [&](const std::string& conv, const std::string& bn, const Var& in, int stride) {
    Var y = conv3d(in, params_.get(conv + ".w"), params_.get(conv + ".b"), stride);
    return batchnorm3d(y, params_.get(bn + ".gamma"), params_.get(bn + ".beta"), params_.get(bn + ".mean")->value,
                       params_.get(bn + ".var")->value, mode);
  };
  Var h = relu(cbn("stem.conv", "stem.bn", x, 1));
  for (int b = 0; b < cfg_.blocks; ++b) {
    const std::string p = "res" + std::to_string(b);
    Var y = relu(cbn(p + ".conv1", p + ".bn1", h, 2));
    y = cbn(p + ".conv2", p + ".bn2", y, 1);
    Var shortcut = conv3d(h, params_.get(p + ".short.w"), params_.get(p + ".short.b"), 2);
    h = relu(add(y, shortcut));
  }
  return linear(global_avg_pool(h), params_.get("head.w"), params_.get("head.b"));
}

}  // namespace echoclutter
