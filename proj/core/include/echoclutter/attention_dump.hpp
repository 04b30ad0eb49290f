#pragma once

#include <filesystem>
#include <vector>

#include "echoclutter/filter_net.hpp"

namespace echoclutter {

/// Attention maps of one gate, aligned to the resolution of its skip input:
/// scale s (1-based) is H/2^(s-1) x W/2^(s-1) x F.
struct AttentionMaps {
  int scale = 1;
  /// Pre-sigmoid coefficients, nearest-upsampled and min-max normalized
  /// (all zero when constant).
  Sequence intermediate;
  /// Sigmoid coefficients in (0, 1).
  Sequence final_map;
};

/// Eval-mode forward pass collecting every gate, finest scale first.
/// Throws ContractError when the network has no attention gates.
std::vector<AttentionMaps> dump_attention(FilterNet& net, const Sequence& input);

/// Writes scale{s}_intermediate.stsq and scale{s}_final.stsq into `dir`.
void write_attention_maps(const std::vector<AttentionMaps>& maps, const std::filesystem::path& dir);

}  // namespace echoclutter
