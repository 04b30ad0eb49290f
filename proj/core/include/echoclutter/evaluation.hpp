#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "echoclutter/clutter.hpp"
#include "echoclutter/manifest.hpp"
#include "echoclutter/metrics.hpp"

namespace echoclutter {

/// Class of a pattern id under the default enumeration ("NF", "RL", "NF_RL").
std::string pattern_class_name(int pattern_id, const PatternGrids& grids = {});

struct EvalRow {
  std::string id;
  std::string cls;
  double mare = 0.0;
  double ssim2d = 0.0;
  double ssim3d = 0.0;
  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

struct MeanStd {
  double mean = 0.0;
  /// Sample standard deviation (0 for a single row).
  double std = 0.0;
  friend bool operator==(const MeanStd&, const MeanStd&) = default;
};

struct EvalReport {
  std::string filter;
  std::string config_digest;
  std::vector<EvalRow> rows;
  /// class -> metric ("mare", "ssim2d", "ssim3d") -> summary.
  std::map<std::string, std::map<std::string, MeanStd>> aggregates;
};

MeanStd mean_std(const std::vector<double>& v);
void recompute_aggregates(EvalReport& r);

/// Scores `<predictions_dir>/<id>.stsq` against each record's clean sequence,
/// inside the default sector. Every id must have a prediction
/// (MissingPredictionError listing all absent ids otherwise).
EvalReport evaluate(const DatasetManifest& m, const std::vector<const ManifestRecord*>& records,
                    const std::filesystem::path& predictions_dir, const std::string& filter_name,
                    const std::string& config_digest, const SsimConfig& cfg = {});

/// Metrics for one pair with the conventions used by evaluate().
EvalRow score_pair(const std::string& id, int pattern_id, const Sequence& reference, const Sequence& prediction,
                   const SsimConfig& cfg = {});

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);

}  // namespace echoclutter
