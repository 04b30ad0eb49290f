#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "echoclutter/random.hpp"
#include "echoclutter/sequence.hpp"
#include "echoclutter/tensor.hpp"

namespace testing_support {

/// Directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("echoclutter_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline echoclutter::Sequence random_sequence(echoclutter::Rng& rng, echoclutter::Dims d) {
  std::vector<float> v(d.size());
  for (float& x : v) x = static_cast<float>(rng.uniform());
  return echoclutter::Sequence(d, std::move(v));
}

inline echoclutter::Tensor random_tensor(echoclutter::Rng& rng, echoclutter::Shape s, double scale = 1.0) {
  echoclutter::Tensor t(std::move(s));
  for (float& x : t.values()) x = static_cast<float>(scale * rng.normal());
  return t;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace testing_support
