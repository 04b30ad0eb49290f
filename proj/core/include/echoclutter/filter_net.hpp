#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echoclutter/kv_config.hpp"
#include "echoclutter/ops.hpp"
#include "echoclutter/param_store.hpp"
#include "echoclutter/sequence.hpp"

namespace echoclutter {

struct NetConfig {
  int levels = 3;
  int base_channels = 16;
  bool use_attention = true;
  bool use_residual_skip = true;
  /// false selects the frame-wise 2D variant (3x3x1 kernels).
  bool temporal_kernels = true;
  float dropout_rate = 0.05F;

  static NetConfig desk() {
    NetConfig c;
    c.levels = 2;
    c.base_channels = 8;
    return c;
  }

  void validate() const;
  /// `key = value` lines understood by from_kv().
  std::string to_text() const;
  static NetConfig from_kv(const KvConfig& kv);
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Encoder width of level l; the second conv of the level doubles it.
inline std::size_t level_channels(const NetConfig& c, int l) {
  return static_cast<std::size_t>(c.base_channels) << l;
}

/// Trainable scalar count implied by the layer list, computed from the
/// channel arithmetic alone (no network is built).
std::size_t expected_parameter_count(const NetConfig& c);

struct AttentionTrace {
  int level = 0;
  /// Pre-sigmoid coefficients at the gating (coarse) resolution.
  Var q;
  /// Sigmoid coefficients upsampled to the skip resolution.
  Var alpha;
};

struct ForwardTrace {
  /// Output of each encoder level's second ReLU (before dropout).
  std::vector<Var> encoder_taps;
  std::vector<AttentionTrace> attention;
};

/// Attention-gated residual U-Net over (N, 1, H, W, F) inputs.
///
/// Parameter naming: enc{l}.conv{1,2}.{w,b}, enc{l}.bn{1,2}.{gamma,beta,mean,var},
/// the same under bott. and dec{l}., ag{l}.{wx,wg,bxg,psi,bpsi} and final.{w,b}.
class FilterNet {
 public:
  FilterNet(NetConfig cfg, std::uint64_t seed);

  const NetConfig& config() const noexcept { return cfg_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.parameter_count(); }

  /// Throws DimensionError unless H and W are divisible by 2^levels.
  Var forward(const Var& x, Mode mode, std::uint64_t dropout_seed = 0, ForwardTrace* trace = nullptr);

  /// Second-ReLU outputs of the first `count` encoder levels (no dropout).
  std::vector<Var> encoder_features(const Var& x, Mode mode, int count);

  /// Detaches every parameter from gradient tracking.
  void freeze();

 private:
  Var block(const std::string& prefix, const Var& x, Mode mode, std::uint64_t dropout_seed, ForwardTrace* trace);
  Var conv_bn_relu(const std::string& prefix, int idx, const Var& x, Mode mode);
  Var attention_gate(int level, const Var& x, const Var& g, ForwardTrace* trace);

  NetConfig cfg_;
  ParamStore params_;
};

/// Standalone gate used by the network: x (N, Fl, H, W, F) gated by
/// g (N, Fg, H/2, W/2, F). Returns alpha * x; q and alpha are optional outputs.
Var attention_gate_forward(const Var& x, const Var& g, const Var& wx, const Var& wg, const Var& bxg, const Var& psi,
                           const Var& bpsi, Var* q_out = nullptr, Var* alpha_out = nullptr);

/// Sequences (equal dims) to a (N, 1, H, W, F) tensor.
Tensor sequences_to_batch(const std::vector<const Sequence*>& seqs);
Tensor sequence_to_batch(const Sequence& s);
/// Channel `c` of sample `n` of a rank-5 tensor as a frame-major volume.
Volume batch_to_volume(const Tensor& t, std::size_t n, std::size_t c = 0);
Tensor volume_to_batch(const Volume& v);

/// Eval-mode inference on one sequence, clamped to [0,1] and zeroed outside
/// the default sector of its frame size.
Sequence filter_sequence(FilterNet& net, const Sequence& input);

}  // namespace echoclutter
