#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace echoclutter {

/// UTF-8 `key = value` text. Blank lines and lines starting with '#' are
/// ignored; a repeated key is a FormatError. Reads are tracked so callers can
/// reject keys nobody consumed.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse(const std::string& text, const std::string& origin = "<config>");
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::optional<std::string> get_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::string> get_strings(const std::string& key, std::vector<std::string> fallback) const;

  /// Keys present in the file but never read.
  std::vector<std::string> unused_keys() const;

  /// Canonical `key=value\n` lines in key order.
  std::string canonical() const;

  /// FNV-1a 64 of canonical(), as 16 lowercase hex digits.
  std::string digest() const;

  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string origin_ = "<config>";
};

std::uint64_t fnv1a64(const std::string& bytes) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace echoclutter
