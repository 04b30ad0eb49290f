#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace echoclutter {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s) noexcept;
std::string shape_string(const Shape& s);

/// Dense float32 array. Five-dimensional activations use the layout
/// (batch, channels, height, width, frames) with frames innermost.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0F);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }
  static Tensor scalar(float v) { return Tensor(Shape{1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  std::vector<float>& storage() noexcept { return data_; }
  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Element of a rank-5 tensor.
  std::size_t offset5(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t f) const noexcept {
    return (((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w) * shape_[4] + f;
  }
  float& at5(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t f) noexcept {
    return data_[offset5(n, c, h, w, f)];
  }
  float at5(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t f) const noexcept {
    return data_[offset5(n, c, h, w, f)];
  }

  Tensor reshaped(Shape shape) const;
  void fill(float v);
  /// this += other (same shape; DimensionError otherwise).
  void add_(const Tensor& other);
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Throws DimensionError naming `what` unless the shapes agree.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_rank(const Tensor& t, std::size_t rank, const char* what);

}  // namespace echoclutter
