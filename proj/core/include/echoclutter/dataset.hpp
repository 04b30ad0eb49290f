#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "echoclutter/clutter.hpp"
#include "echoclutter/manifest.hpp"
#include "echoclutter/phantom.hpp"

namespace echoclutter {

struct SimulatedPair {
  Sequence clean;
  Sequence cluttered;
  BinaryVolume mask;
  PlacedClutter placed;
  std::uint32_t phase_offset = 0;
};

/// One clean phantom plus its cluttered copy for `spec`. The per-record seed is
/// derived from (master_seed, pattern_id), so output does not depend on which
/// other patterns are generated alongside.
SimulatedPair simulate_pair(const ClutterSpec& spec, const ClutterConfig& cfg, Dims dims, std::uint64_t master_seed);

struct SimulateOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  Dims dims{64, 64, 16};
  ClutterConfig clutter{};
  /// Patterns to generate, in order.
  std::vector<ClutterSpec> patterns;
  /// Every n-th record goes to the "val" split; 0 keeps everything in "train".
  std::uint32_t holdout_every = 4;
};

/// Writes clean/, cluttered/, mask/ and manifest.tsv under out_dir.
DatasetManifest simulate_dataset(const SimulateOptions& opts);

/// Patterns of class `cls` (all classes when empty), thinned to `limit` evenly
/// spaced entries: index floor(i * n / limit).
std::vector<ClutterSpec> select_patterns(const std::vector<ClutterSpec>& all, std::optional<ClutterClass> cls,
                                         std::size_t limit);

std::string record_id(int pattern_id);

}  // namespace echoclutter
