#include "echoclutter/dataset.hpp"

#include <cstdio>

#include "echoclutter/codec.hpp"
#include "echoclutter/error.hpp"
#include "echoclutter/random.hpp"

namespace echoclutter {

std::string record_id(int pattern_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%03d", pattern_id);
  return buf;
}

SimulatedPair simulate_pair(const ClutterSpec& spec, const ClutterConfig& cfg, Dims dims, std::uint64_t master_seed) {
  if (dims.empty()) {
    throw DimensionError("simulation dims must be non-empty: " + to_string(dims));
  }
  const std::uint64_t seed = derive_seed(master_seed, {static_cast<std::uint64_t>(spec.pattern_id)});
  PhantomConfig pc = PhantomConfig::default_for(dims.height, dims.width);
  pc.speckle_seed = derive_seed(seed, {0});
  const std::uint64_t phantom_seed = derive_seed(seed, {1});

  SimulatedPair out;
  out.clean = generate_phantom(pc, dims.frames, phantom_seed);
  out.phase_offset = phantom_phase_offset(pc, phantom_seed);
  out.placed = place_clutter(spec, pc.geometry, cfg.calibration_for(dims.height), dims.height, dims.width, dims.frames,
                             derive_seed(seed, {2}), PlacementOptions::from(cfg, dims.height));
  const Volume clutter = render_clutter_volume(out.placed, dims.height, dims.width, dims.frames);
  auto sup = superimpose(out.clean, clutter, pc.geometry, cfg.mask_threshold);
  out.cluttered = std::move(sup.cluttered);
  out.mask = std::move(sup.mask);
  return out;
}

DatasetManifest simulate_dataset(const SimulateOptions& opts) {
  opts.clutter.validate();
  namespace fs = std::filesystem;
  for (const char* sub : {"clean", "cluttered", "mask"}) {
    std::error_code ec;
    fs::create_directories(opts.out_dir / sub, ec);
    if (ec) {
      throw IoError("cannot create " + (opts.out_dir / sub).string() + ": " + ec.message());
    }
  }
  DatasetManifest m;
  m.base_dir = opts.out_dir;
  for (std::size_t k = 0; k < opts.patterns.size(); ++k) {
    const ClutterSpec& spec = opts.patterns[k];
    const SimulatedPair pair = simulate_pair(spec, opts.clutter, opts.dims, opts.seed);
    ManifestRecord r;
    r.id = record_id(spec.pattern_id);
    r.clean_path = "clean/" + r.id + ".stsq";
    r.cluttered_path = "cluttered/" + r.id + ".stsq";
    r.mask_path = "mask/" + r.id + ".stsq";
    r.pattern_id = spec.pattern_id;
    r.start_frame_offset = pair.phase_offset;
    r.split = (opts.holdout_every > 0 && k % opts.holdout_every == opts.holdout_every - 1) ? "val" : "train";
    encode_sequence(pair.clean, m.resolve(r.clean_path));
    encode_sequence(pair.cluttered, m.resolve(r.cluttered_path));
    encode_sequence(pair.mask.as_sequence(), m.resolve(r.mask_path));
    m.records.push_back(std::move(r));
  }
  m.validate(false);
  write_manifest(m, opts.out_dir / "manifest.tsv");
  return m;
}

std::vector<ClutterSpec> select_patterns(const std::vector<ClutterSpec>& all, std::optional<ClutterClass> cls,
                                         std::size_t limit) {
  std::vector<ClutterSpec> pool;
  for (const auto& s : all) {
    if (!cls || s.cls == *cls) {
      pool.push_back(s);
    }
  }
  if (limit == 0 || limit >= pool.size()) {
    return pool;
  }
  std::vector<ClutterSpec> out;
  out.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) {
    out.push_back(pool[i * pool.size() / limit]);
  }
  return out;
}

}  // namespace echoclutter
