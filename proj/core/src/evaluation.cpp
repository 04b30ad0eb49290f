#include "echoclutter/evaluation.hpp"

#include <cmath>
#include "json.hpp"

#include "echoclutter/codec.hpp"
#include "echoclutter/error.hpp"
#include "echoclutter/geometry.hpp"

namespace echoclutter {

std::string pattern_class_name(int pattern_id, const PatternGrids& grids) {
  const auto list = enumerate_pattern_specs(grids);
  if (pattern_id < 0 || static_cast<std::size_t>(pattern_id) >= list.size()) {
    throw RangeError("pattern id " + std::to_string(pattern_id) + " outside the enumeration");
  }
  return to_string(list[pattern_id].cls);
}

MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) return {};
  double s = 0.0;
  for (double x : v) s += x;
  const double mean = s / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

void recompute_aggregates(EvalReport& r) {
  std::map<std::string, std::map<std::string, std::vector<double>>> cols;
  for (const auto& row : r.rows) {
    cols[row.cls]["mare"].push_back(row.mare);
    cols[row.cls]["ssim2d"].push_back(row.ssim2d);
    cols[row.cls]["ssim3d"].push_back(row.ssim3d);
  }
  r.aggregates.clear();
  for (const auto& [cls, metrics] : cols)
    for (const auto& [name, values] : metrics) r.aggregates[cls][name] = mean_std(values);
}

EvalRow score_pair(const std::string& id, int pattern_id, const Sequence& reference, const Sequence& prediction,
                   const SsimConfig& cfg) {
  const Dims& d = reference.dims();
  const BinaryImage sector = sector_mask(SectorGeometry::default_for(d.height, d.width), d.height, d.width);
  EvalRow row;
  row.id = id;
  row.cls = pattern_class_name(pattern_id);
  row.mare = mare(reference, prediction);
  row.ssim2d = ssim2d(reference, prediction, cfg, &sector);
  row.ssim3d = ssim3d(reference, prediction, cfg, &sector);
  return row;
}

EvalReport evaluate(const DatasetManifest& m, const std::vector<const ManifestRecord*>& records,
                    const std::filesystem::path& predictions_dir, const std::string& filter_name,
                    const std::string& config_digest, const SsimConfig& cfg) {
  std::vector<std::string> missing;
  for (const auto* r : records) {
    if (!std::filesystem::exists(predictions_dir / (r->id + ".stsq"))) missing.push_back(r->id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw MissingPredictionError("missing predictions for " + std::to_string(missing.size()) + " record(s): " + list,
                                 missing);
  }
  EvalReport rep;
  rep.filter = filter_name;
  rep.config_digest = config_digest;
  for (const auto* r : records) {
    const Sequence ref = decode_sequence(m.resolve(r->clean_path));
    const Sequence pred = decode_sequence(predictions_dir / (r->id + ".stsq"));
    if (!(ref.dims() == pred.dims())) {
      throw DimensionError("prediction for '" + r->id + "' has dims " + to_string(pred.dims()) + ", expected " +
                           to_string(ref.dims()));
    }
    rep.rows.push_back(score_pair(r->id, r->pattern_id, ref, pred, cfg));
  }
  recompute_aggregates(rep);
  return rep;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["filter"] = r.filter;
  j["config_digest"] = r.config_digest;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    j["rows"].push_back({{"id", row.id}, {"class", row.cls}, {"mare", row.mare}, {"ssim2d", row.ssim2d},
                         {"ssim3d", row.ssim3d}});
  }
  j["aggregates"] = nlohmann::ordered_json::object();
  for (const auto& [cls, metrics] : r.aggregates)
    for (const auto& [name, ms] : metrics) j["aggregates"][cls][name] = {{"mean", ms.mean}, {"std", ms.std}};
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.filter = j.at("filter").get<std::string>();
    r.config_digest = j.at("config_digest").get<std::string>();
    for (const auto& row : j.at("rows")) {
      r.rows.push_back({row.at("id").get<std::string>(), row.at("class").get<std::string>(),
                        row.at("mare").get<double>(), row.at("ssim2d").get<double>(), row.at("ssim3d").get<double>()});
    }
    for (const auto& [cls, metrics] : j.at("aggregates").items())
      for (const auto& [name, ms] : metrics.items())
        r.aggregates[cls][name] = {ms.at("mean").get<double>(), ms.at("std").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
  return r;
}

}  // namespace echoclutter
