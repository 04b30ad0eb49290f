#include "echoclutter/filter_net.hpp"

#include <cmath>
#include <sstream>

#include "echoclutter/error.hpp"
#include "echoclutter/geometry.hpp"
#include "echoclutter/random.hpp"

namespace echoclutter {

namespace {

std::size_t kt(const NetConfig& c) { return c.temporal_kernels ? 3 : 1; }

Tensor he_uniform(const Shape& shape, std::size_t fan_in, std::uint64_t seed) {
  Tensor t(shape);
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

void NetConfig::validate() const {
  if (levels < 1) throw ParameterError("levels must be >= 1");
  if (base_channels < 1) throw ParameterError("base_channels must be >= 1");
  if (levels > 10) throw ParameterError("levels must be <= 10");
  if (!(dropout_rate >= 0.0F && dropout_rate < 1.0F)) throw ParameterError("dropout_rate must lie in [0,1)");
}

std::string NetConfig::to_text() const {
  std::ostringstream o;
  o << "net.levels = " << levels << "\n"
    << "net.base_channels = " << base_channels << "\n"
    << "net.attention = " << (use_attention ? 1 : 0) << "\n"
    << "net.residual = " << (use_residual_skip ? 1 : 0) << "\n"
    << "net.temporal = " << (temporal_kernels ? 1 : 0) << "\n"
    << "net.dropout = " << dropout_rate << "\n";
  return o.str();
}

NetConfig NetConfig::from_kv(const KvConfig& kv) {
  NetConfig c;
  c.levels = static_cast<int>(kv.get_int("net.levels", c.levels));
  c.base_channels = static_cast<int>(kv.get_int("net.base_channels", c.base_channels));
  c.use_attention = kv.get_int("net.attention", c.use_attention) != 0;
  c.use_residual_skip = kv.get_int("net.residual", c.use_residual_skip) != 0;
  c.temporal_kernels = kv.get_int("net.temporal", c.temporal_kernels) != 0;
  c.dropout_rate = static_cast<float>(kv.get_double("net.dropout", c.dropout_rate));
  c.validate();
  return c;
}

std::size_t expected_parameter_count(const NetConfig& c) {
  const std::size_t taps = 9 * kt(c);
  auto conv = [&](std::size_t in, std::size_t out) { return in * out * taps + out; };
  auto bn = [](std::size_t ch) { return 2 * ch; };
  std::size_t total = 0;
  for (int l = 0; l < c.levels; ++l) {
    const std::size_t cl = level_channels(c, l);
    const std::size_t in = l == 0 ? 1 : cl;
    total += conv(in, cl) + bn(cl) + conv(cl, 2 * cl) + bn(2 * cl);
  }
  const std::size_t cb = level_channels(c, c.levels);
  total += conv(cb, cb) + bn(cb) + conv(cb, 2 * cb) + bn(2 * cb);
  for (int l = c.levels - 1; l >= 0; --l) {
    const std::size_t fl = 2 * level_channels(c, l);
    const std::size_t fg = 2 * level_channels(c, l + 1);
    total += conv(fg + fl, fl) + bn(fl) + conv(fl, fl) + bn(fl);
    if (c.use_attention) total += fl * fl + fg * fl + fl + fl + 1;
  }
  total += 2 * level_channels(c, 0) + 1;
  return total;
}

FilterNet::FilterNet(NetConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t k = kt(cfg_);
  std::uint64_t counter = 0;
  auto conv = [&](const std::string& name, std::size_t in, std::size_t out) {
    params_.add(name + ".w", he_uniform({out, in, 3, 3, k}, in * 9 * k, derive_seed(seed, {++counter})));
    params_.add(name + ".b", Tensor(Shape{out}));
  };
  auto bn = [&](const std::string& name, std::size_t ch) {
    params_.add(name + ".gamma", Tensor(Shape{ch}, 1.0F));
    params_.add(name + ".beta", Tensor(Shape{ch}));
    params_.add(name + ".mean", Tensor(Shape{ch}), false);
    params_.add(name + ".var", Tensor(Shape{ch}, 1.0F), false);
  };
  auto level = [&](const std::string& p, std::size_t in, std::size_t mid, std::size_t out) {
    conv(p + ".conv1", in, mid);
    bn(p + ".bn1", mid);
    conv(p + ".conv2", mid, out);
    bn(p + ".bn2", out);
  };
  for (int l = 0; l < cfg_.levels; ++l) {
    const std::size_t cl = level_channels(cfg_, l);
    level("enc" + std::to_string(l), l == 0 ? 1 : cl, cl, 2 * cl);
  }
  const std::size_t cb = level_channels(cfg_, cfg_.levels);
  level("bott", cb, cb, 2 * cb);
  for (int l = cfg_.levels - 1; l >= 0; --l) {
    const std::size_t fl = 2 * level_channels(cfg_, l);
    const std::size_t fg = 2 * level_channels(cfg_, l + 1);
    if (cfg_.use_attention) {
      const std::string p = "ag" + std::to_string(l);
      params_.add(p + ".wx", he_uniform({fl, fl, 1, 1, 1}, fl, derive_seed(seed, {++counter})));
      params_.add(p + ".wg", he_uniform({fl, fg, 1, 1, 1}, fg, derive_seed(seed, {++counter})));
      params_.add(p + ".bxg", Tensor(Shape{fl}));
      params_.add(p + ".psi", he_uniform({1, fl, 1, 1, 1}, fl, derive_seed(seed, {++counter})));
      params_.add(p + ".bpsi", Tensor(Shape{1}));
    }
    level("dec" + std::to_string(l), fg + fl, fl, fl);
  }
  // Zero final projection: the residual network starts as the identity.
  params_.add("final.w", Tensor(Shape{1, 2 * level_channels(cfg_, 0), 1, 1, 1}));
  params_.add("final.b", Tensor(Shape{1}));
}

void FilterNet::freeze() {
  for (const auto& e : params_.entries()) e.var->requires_grad = false;
}

Var FilterNet::conv_bn_relu(const std::string& prefix, int idx, const Var& x, Mode mode) {
  const std::string c = prefix + ".conv" + std::to_string(idx);
  const std::string b = prefix + ".bn" + std::to_string(idx);
  Var y = conv3d(x, params_.get(c + ".w"), params_.get(c + ".b"));
  y = batchnorm3d(y, params_.get(b + ".gamma"), params_.get(b + ".beta"), params_.get(b + ".mean")->value,
                  params_.get(b + ".var")->value, mode);
  return relu(y);
}

Var FilterNet::block(const std::string& prefix, const Var& x, Mode mode, std::uint64_t dropout_seed,
                     ForwardTrace* trace) {
  Var y = conv_bn_relu(prefix, 1, x, mode);
  y = conv_bn_relu(prefix, 2, y, mode);
  if (trace && prefix.rfind("enc", 0) == 0) trace->encoder_taps.push_back(y);
  return dropout(y, cfg_.dropout_rate, mode, dropout_seed);
}

Var attention_gate_forward(const Var& x, const Var& g, const Var& wx, const Var& wg, const Var& bxg, const Var& psi,
                           const Var& bpsi, Var* q_out, Var* alpha_out) {
  require_rank(x->value, 5, "attention gate x");
  require_rank(g->value, 5, "attention gate g");
  const auto& xs = x->shape();
  const auto& gs = g->shape();
  if (xs[0] != gs[0] || xs[2] != 2 * gs[2] || xs[3] != 2 * gs[3] || xs[4] != gs[4]) {
    throw DimensionError("attention gate: x " + shape_string(xs) + " and g " + shape_string(gs) +
                         " are not a 2x2x1 pair");
  }
  Var x_down = avgpool3d(x);
  Var a = relu(add(conv3d(x_down, wx, bxg), conv3d(g, wg, nullptr)));
  Var q = conv3d(a, psi, bpsi);
  Var alpha = upsample3d(sigmoid(q));
  if (q_out) *q_out = q;
  if (alpha_out) *alpha_out = alpha;
  return mul_channels(x, alpha);
}

Var FilterNet::attention_gate(int level, const Var& x, const Var& g, ForwardTrace* trace) {
  const std::string p = "ag" + std::to_string(level);
  Var q, alpha;
  Var out = attention_gate_forward(x, g, params_.get(p + ".wx"), params_.get(p + ".wg"), params_.get(p + ".bxg"),
                                   params_.get(p + ".psi"), params_.get(p + ".bpsi"), &q, &alpha);
  if (trace) trace->attention.push_back({level, q, alpha});
  return out;
}

Var FilterNet::forward(const Var& x, Mode mode, std::uint64_t dropout_seed, ForwardTrace* trace) {
  require_rank(x->value, 5, "filter net input");
  const auto& s = x->shape();
  const std::size_t div = std::size_t{1} << cfg_.levels;
  if (s[1] != 1) throw DimensionError("filter net expects one input channel, got " + shape_string(s));
  if (s[2] % div != 0 || s[3] % div != 0) {
    throw DimensionError("input " + shape_string(s) + ": H and W must be divisible by " + std::to_string(div));
  }
  std::uint64_t block_id = 0;
  auto seed = [&] { return derive_seed(dropout_seed, {++block_id}); };

  std::vector<Var> skips;
  Var h = x;
  for (int l = 0; l < cfg_.levels; ++l) {
    h = block("enc" + std::to_string(l), h, mode, seed(), trace);
    skips.push_back(h);
    h = maxpool3d(h);
  }
  h = block("bott", h, mode, seed(), trace);
  for (int l = cfg_.levels - 1; l >= 0; --l) {
    Var skip = skips[l];
    if (cfg_.use_attention) skip = attention_gate(l, skip, h, trace);
    h = concat_channels(upsample3d(h), skip);
    h = block("dec" + std::to_string(l), h, mode, seed(), trace);
  }
  Var out = conv3d(h, params_.get("final.w"), params_.get("final.b"));
  if (cfg_.use_residual_skip) out = add(x, out);
  return out;
}

std::vector<Var> FilterNet::encoder_features(const Var& x, Mode mode, int count) {
  if (count < 1 || count > cfg_.levels) {
    throw ContractError("encoder_features: " + std::to_string(count) + " taps requested from " +
                        std::to_string(cfg_.levels) + " levels");
  }
  std::vector<Var> taps;
  Var h = x;
  for (int l = 0; l < count; ++l) {
    const std::string p = "enc" + std::to_string(l);
    h = conv_bn_relu(p, 2, conv_bn_relu(p, 1, h, mode), mode);
    taps.push_back(h);
    if (l + 1 < count) h = maxpool3d(h);
  }
  return taps;
}

Tensor sequences_to_batch(const std::vector<const Sequence*>& seqs) {
  if (seqs.empty()) throw ContractError("empty batch");
  const Dims d = seqs.front()->dims();
  Tensor t(Shape{seqs.size(), 1, d.height, d.width, d.frames});
  for (std::size_t n = 0; n < seqs.size(); ++n) {
    if (!(seqs[n]->dims() == d)) {
      throw DimensionError("batch mixes dims " + to_string(d) + " and " + to_string(seqs[n]->dims()));
    }
    for (std::uint32_t f = 0; f < d.frames; ++f)
      for (std::uint32_t r = 0; r < d.height; ++r)
        for (std::uint32_t c = 0; c < d.width; ++c) t.at5(n, 0, r, c, f) = seqs[n]->at(f, r, c);
  }
  return t;
}

Tensor sequence_to_batch(const Sequence& s) { return sequences_to_batch({&s}); }

Tensor volume_to_batch(const Volume& v) {
  const Dims d = v.dims();
  Tensor t(Shape{1, 1, d.height, d.width, d.frames});
  for (std::uint32_t f = 0; f < d.frames; ++f)
    for (std::uint32_t r = 0; r < d.height; ++r)
      for (std::uint32_t c = 0; c < d.width; ++c) t.at5(0, 0, r, c, f) = v.at(f, r, c);
  return t;
}

Volume batch_to_volume(const Tensor& t, std::size_t n, std::size_t c) {
  require_rank(t, 5, "batch_to_volume");
  const Dims d{static_cast<std::uint32_t>(t.dim(2)), static_cast<std::uint32_t>(t.dim(3)),
               static_cast<std::uint32_t>(t.dim(4))};
  Volume v(d);
  for (std::uint32_t f = 0; f < d.frames; ++f)
    for (std::uint32_t r = 0; r < d.height; ++r)
      for (std::uint32_t col = 0; col < d.width; ++col) v.at(f, r, col) = t.at5(n, c, r, col, f);
  return v;
}

Sequence filter_sequence(FilterNet& net, const Sequence& input) {
  NoGradGuard guard;
  const Var y = net.forward(constant(sequence_to_batch(input)), Mode::Eval);
  return apply_default_sector(Sequence::clamped(batch_to_volume(y->value, 0)));
}

}  // namespace echoclutter
