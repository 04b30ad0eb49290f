#include "echoclutter/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "echoclutter/error.hpp"

namespace echoclutter {

std::string to_string(const Dims& d) {
  return std::to_string(d.height) + "x" + std::to_string(d.width) + "x" + std::to_string(d.frames);
}

Volume::Volume(Dims dims, float fill) : dims_(dims), data_(dims.size(), fill) {}

Volume::Volume(Dims dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
  if (data_.size() != dims_.size()) {
    throw DimensionError("volume data length " + std::to_string(data_.size()) + " does not match " +
                         to_string(dims_));
  }
}

Sequence::Sequence(Dims dims, std::vector<float> data) {
  if (dims.empty()) {
    throw DimensionError("sequence dims must be positive, got " + to_string(dims));
  }
  if (data.size() != dims.size()) {
    throw DimensionError("sequence data length " + std::to_string(data.size()) +
                         " does not match " + to_string(dims));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float v = data[i];
    if (!std::isfinite(v) || v < 0.0F || v > 1.0F) {
      throw RangeError("intensity " + std::to_string(v) + " at index " + std::to_string(i) +
                       " outside [0,1]");
    }
  }
  volume_ = Volume(dims, std::move(data));
}

Sequence Sequence::zeros(Dims dims) { return Sequence(dims, std::vector<float>(dims.size(), 0.0F)); }

Sequence Sequence::clamped(const Volume& v) {
  std::vector<float> out(v.values().begin(), v.values().end());
  for (float& x : out) {
    x = std::isfinite(x) ? std::clamp(x, 0.0F, 1.0F) : 0.0F;
  }
  return Sequence(v.dims(), std::move(out));
}

std::size_t BinaryImage::count() const noexcept {
  return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](auto p) { return p != 0; }));
}

std::size_t BinaryVolume::count() const noexcept {
  return static_cast<std::size_t>(std::count_if(voxels.begin(), voxels.end(), [](auto p) { return p != 0; }));
}

Sequence BinaryVolume::as_sequence() const {
  std::vector<float> data(voxels.size());
  std::transform(voxels.begin(), voxels.end(), data.begin(), [](auto v) { return v ? 1.0F : 0.0F; });
  return Sequence(dims, std::move(data));
}

BinaryVolume BinaryVolume::from_sequence(const Sequence& s, float threshold) {
  BinaryVolume out{s.dims(), std::vector<std::uint8_t>(s.size())};
  auto vals = s.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    out.voxels[i] = vals[i] > threshold ? 1 : 0;
  }
  return out;
}

}  // namespace echoclutter
