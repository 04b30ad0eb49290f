#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace echoclutter {

/// Extents of a spatiotemporal volume: rows, columns, frames.
struct Dims {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t frames = 0;

  constexpr std::size_t frame_size() const noexcept {
    return static_cast<std::size_t>(height) * width;
  }
  constexpr std::size_t size() const noexcept { return frame_size() * frames; }
  constexpr bool empty() const noexcept { return height == 0 || width == 0 || frames == 0; }

  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& d);

/// Real-valued H x W x F volume without range restrictions. Storage is
/// frame-major, then row-major: index = (f * H + row) * W + col.
class Volume {
 public:
  Volume() = default;
  explicit Volume(Dims dims, float fill = 0.0F);
  Volume(Dims dims, std::vector<float> data);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::uint32_t frame, std::uint32_t row, std::uint32_t col) const noexcept {
    return (static_cast<std::size_t>(frame) * dims_.height + row) * dims_.width + col;
  }
  float& at(std::uint32_t frame, std::uint32_t row, std::uint32_t col) noexcept {
    return data_[index(frame, row, col)];
  }
  float at(std::uint32_t frame, std::uint32_t row, std::uint32_t col) const noexcept {
    return data_[index(frame, row, col)];
  }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  std::span<const float> frame(std::uint32_t f) const noexcept {
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(f) * dims_.frame_size(),
                                                 dims_.frame_size());
  }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Dims dims_{};
  std::vector<float> data_;
};

/// Single-channel echo sequence with every intensity finite and in [0, 1].
/// The invariant is checked at construction; there is no mutable access.
class Sequence {
 public:
  Sequence() = default;
  /// Throws DimensionError for empty dims or a size mismatch, RangeError for
  /// non-finite or out-of-range values.
  Sequence(Dims dims, std::vector<float> data);

  static Sequence zeros(Dims dims);
  /// Clamps each value into [0, 1] (non-finite values become 0).
  static Sequence clamped(const Volume& v);
  static Sequence from_volume(const Volume& v) { return Sequence(v.dims(), {v.values().begin(), v.values().end()}); }

  const Dims& dims() const noexcept { return volume_.dims(); }
  std::size_t size() const noexcept { return volume_.size(); }
  float at(std::uint32_t frame, std::uint32_t row, std::uint32_t col) const noexcept {
    return volume_.at(frame, row, col);
  }
  std::span<const float> values() const noexcept { return volume_.values(); }
  std::span<const float> frame(std::uint32_t f) const noexcept { return volume_.frame(f); }
  const Volume& volume() const noexcept { return volume_; }

  friend bool operator==(const Sequence&, const Sequence&) = default;

 private:
  Volume volume_;
};

/// Binary H x W image (row-major), e.g. the sector field of view.
struct BinaryImage {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::uint32_t row, std::uint32_t col) const noexcept {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  std::size_t count() const noexcept;
  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;
};

/// Binary H x W x F volume, frame-major like Volume.
struct BinaryVolume {
  Dims dims{};
  std::vector<std::uint8_t> voxels;

  std::uint8_t at(std::uint32_t frame, std::uint32_t row, std::uint32_t col) const noexcept {
    return voxels[(static_cast<std::size_t>(frame) * dims.height + row) * dims.width + col];
  }
  std::size_t count() const noexcept;
  Sequence as_sequence() const;
  static BinaryVolume from_sequence(const Sequence& s, float threshold = 0.5F);
  friend bool operator==(const BinaryVolume&, const BinaryVolume&) = default;
};

}  // namespace echoclutter
