#include "echoclutter/manifest.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "echoclutter/codec.hpp"
#include "echoclutter/error.hpp"

namespace echoclutter {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) {
      break;
    }
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what, std::size_t line_no) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError("manifest line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
  return value;
}

}  // namespace

std::filesystem::path DatasetManifest::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

std::vector<const ManifestRecord*> DatasetManifest::split(std::string_view name) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records) {
    if (r.split == name) {
      out.push_back(&r);
    }
  }
  return out;
}

void DatasetManifest::validate(bool check_files) const {
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) {
      throw FormatError("duplicate manifest id '" + r.id + "'");
    }
    if (check_files) {
      const Dims clean = peek_sequence_dims(resolve(r.clean_path));
      const Dims cluttered = peek_sequence_dims(resolve(r.cluttered_path));
      const Dims mask = peek_sequence_dims(resolve(r.mask_path));
      if (!(clean == cluttered) || !(clean == mask)) {
        throw DimensionError("record '" + r.id + "' has mismatched dims: " + to_string(clean) + ", " +
                             to_string(cluttered) + ", " + to_string(mask));
      }
    }
  }
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line.front() == '#') {
      continue;
    }
    auto fields = split_tabs(line);
    if (fields.size() != 6 && fields.size() != 7) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": expected 6 or 7 tab-separated fields, got " +
                        std::to_string(fields.size()));
    }
    ManifestRecord r;
    r.id = fields[0];
    r.clean_path = fields[1];
    r.cluttered_path = fields[2];
    r.mask_path = fields[3];
    r.pattern_id = parse_number<int>(fields[4], "pattern_id", line_no);
    r.start_frame_offset = parse_number<std::uint32_t>(fields[5], "start_frame_offset", line_no);
    if (fields.size() == 7) {
      r.split = fields[6];
    }
    if (r.id.empty()) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": empty id");
    }
    m.records.push_back(std::move(r));
  }
  m.validate(false);
  return m;
}

std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream out;
  out << "# id\tclean\tcluttered\tmask\tpattern_id\tstart_frame_offset\tsplit\n";
  for (const auto& r : m.records) {
    out << r.id << '\t' << r.clean_path << '\t' << r.cluttered_path << '\t' << r.mask_path << '\t'
        << r.pattern_id << '\t' << r.start_frame_offset << '\t' << r.split << '\n';
  }
  return out.str();
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open manifest " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  const std::string text = format_manifest(m);
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace echoclutter
