#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace echoclutter {

/// One clean/cluttered/mask triplet. Paths are stored as written in the
/// manifest and resolved against the manifest's directory.
struct ManifestRecord {
  std::string id;
  std::string clean_path;
  std::string cluttered_path;
  std::string mask_path;
  int pattern_id = -1;
  std::uint32_t start_frame_offset = 0;
  /// "train", "val" or "test". Optional trailing column; defaults to "train".
  std::string split = "train";

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// Tab-separated dataset index:
///   id  clean  cluttered  mask  pattern_id  start_frame_offset  [split]
/// Lines starting with '#' are comments.
struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const;
  std::vector<const ManifestRecord*> split(std::string_view name) const;

  /// Unique ids; with `check_files`, every record's three files decode with
  /// identical dims.
  void validate(bool check_files) const;

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) { return a.records == b.records; }
};

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
std::string format_manifest(const DatasetManifest& m);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace echoclutter
