#include "echoclutter/kv_config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "echoclutter/error.hpp"

namespace echoclutter {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw FormatError(where + ": not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') {
      continue;
    }
    const auto eq = t.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) {
      throw FormatError(where + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw FormatError(where + ": empty key");
    }
    if (!cfg.values_.emplace(key, value).second) {
      throw FormatError(where + ": duplicate key '" + key + "'");
    }
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::optional<std::string> KvConfig::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return std::nullopt;
  }
  used_.insert(key);
  return it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get_string(key);
  return v ? to_double(*v, origin_ + ": " + key) : fallback;
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const auto v = get_string(key);
  if (!v) {
    return fallback;
  }
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size()) {
    throw FormatError(origin_ + ": " + key + ": not an integer: '" + *v + "'");
  }
  return out;
}

std::vector<double> KvConfig::get_doubles(const std::string& key, std::vector<double> fallback) const {
  const auto v = get_string(key);
  if (!v) {
    return fallback;
  }
  std::vector<double> out;
  for (const auto& item : split_commas(*v)) {
    out.push_back(to_double(item, origin_ + ": " + key));
  }
  if (out.empty()) {
    throw FormatError(origin_ + ": " + key + ": empty list");
  }
  return out;
}

std::vector<std::string> KvConfig::get_strings(const std::string& key, std::vector<std::string> fallback) const {
  const auto v = get_string(key);
  if (!v) {
    return fallback;
  }
  auto out = split_commas(*v);
  if (out.empty()) {
    throw FormatError(origin_ + ": " + key + ": empty list");
  }
  return out;
}

std::vector<std::string> KvConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (used_.count(k) == 0) {
      out.push_back(k);
    }
  }
  return out;
}

std::string KvConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k + "=" + v + "\n";
  }
  return out;
}

std::string KvConfig::digest() const { return hex64(fnv1a64(canonical())); }

std::uint64_t fnv1a64(const std::string& bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace echoclutter
