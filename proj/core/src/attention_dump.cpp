#include "echoclutter/attention_dump.hpp"

#include <algorithm>

#include "echoclutter/codec.hpp"
#include "echoclutter/error.hpp"

namespace echoclutter {

namespace {

Sequence min_max_normalized(Volume v) {
  auto vals = v.values();
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  const float a = *lo;
  const float span = *hi - *lo;
  for (float& x : vals) x = span > 0.0F ? (x - a) / span : 0.0F;
  return Sequence::clamped(v);
}

}  // namespace

std::vector<AttentionMaps> dump_attention(FilterNet& net, const Sequence& input) {
  if (!net.config().use_attention) {
    throw ContractError("attention dump requested from a network without attention gates");
  }
  NoGradGuard guard;
  ForwardTrace trace;
  net.forward(constant(sequence_to_batch(input)), Mode::Eval, 0, &trace);
  std::vector<AttentionMaps> out;
  for (const auto& t : trace.attention) {
    AttentionMaps m;
    m.scale = t.level + 1;
    m.intermediate = min_max_normalized(batch_to_volume(upsample3d(t.q)->value, 0));
    m.final_map = Sequence::from_volume(batch_to_volume(t.alpha->value, 0));
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end(), [](const AttentionMaps& a, const AttentionMaps& b) { return a.scale < b.scale; });
  return out;
}

void write_attention_maps(const std::vector<AttentionMaps>& maps, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& m : maps) {
    const std::string s = "scale" + std::to_string(m.scale);
    encode_sequence(m.intermediate, dir / (s + "_intermediate.stsq"));
    encode_sequence(m.final_map, dir / (s + "_final.stsq"));
  }
}

}  // namespace echoclutter
