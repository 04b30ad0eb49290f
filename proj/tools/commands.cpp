#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "echoclutter/attention_dump.hpp"
#include "echoclutter/codec.hpp"
#include "echoclutter/dataset.hpp"
#include "echoclutter/error.hpp"
#include "echoclutter/evaluation.hpp"
#include "echoclutter/filter_net.hpp"
#include "echoclutter/geometry.hpp"
#include "echoclutter/kv_config.hpp"
#include "echoclutter/random.hpp"
#include "echoclutter/svd_filter.hpp"
#include "echoclutter/trainer.hpp"
#include "echoclutter/verification.hpp"
#include "echoclutter/weights_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace echoclutter::cli {

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool out_required) {
  app->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  app->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
  auto* o = app->add_option("--out", c.out, "Output path");
  if (out_required) o->required();
}

KvConfig load_config(const Common& c) { return c.config.empty() ? KvConfig{} : KvConfig::load(c.config); }

void reject_unused(const KvConfig& kv) {
  const auto unused = kv.unused_keys();
  if (unused.empty()) return;
  std::string msg = "unknown configuration keys:";
  for (const auto& k : unused) msg += " " + k;
  throw UsageError(msg);
}

// Every resolved option (defaults included) plus the configuration file.
// File locations are left out so that a run relocated to another directory
// reports the same digest.
std::string resolved_digest(const CLI::App& sub, const KvConfig& kv) {
  static const std::set<std::string> locations{"out", "config", "manifest", "log", "weights", "attention-out", "pred"};
  KvConfig all = kv;
  all.set("cli.subcommand", sub.get_name());
  std::istringstream lines(sub.config_to_str(true, false));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(' ') + 1);
    if (locations.count(key)) continue;
    all.set("cli." + key, line.substr(eq + 1));
  }
  return all.digest();
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

fs::path sidecar_path(const fs::path& weights) { return fs::path(weights.string() + ".cfg"); }

NetConfig read_sidecar(const fs::path& weights) {
  const fs::path p = sidecar_path(weights);
  if (!fs::exists(p)) throw IoError("network description " + p.string() + " not found next to the weights");
  const KvConfig kv = KvConfig::load(p);
  NetConfig c = NetConfig::from_kv(kv);
  reject_unused(kv);
  return c;
}

std::vector<const ManifestRecord*> select_split(const DatasetManifest& m, const std::string& split) {
  if (split == "all") {
    std::vector<const ManifestRecord*> v;
    for (const auto& r : m.records) v.push_back(&r);
    return v;
  }
  auto v = m.split(split);
  if (v.empty()) throw ContractError("manifest has no records in split '" + split + "'");
  return v;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  Common common;
  std::string cls = "all";
  std::size_t limit = 0;
  std::uint32_t height = 64;
  std::uint32_t width = 64;
  std::uint32_t frames = 16;
  std::uint32_t holdout_every = 4;
};

int simulate(const CLI::App& sub, const SimulateArgs& a, std::ostream& out) {
  KvConfig kv = load_config(a.common);
  SimulateOptions opts;
  opts.clutter = ClutterConfig::from_kv(kv);
  reject_unused(kv);
  out << "config digest: " << resolved_digest(sub, kv) << "\n";

  std::optional<ClutterClass> cls;
  if (a.cls != "all") {
    try {
      cls = parse_clutter_class(a.cls);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  opts.out_dir = a.common.out;
  opts.seed = a.common.seed;
  opts.dims = Dims{a.height, a.width, a.frames};
  opts.holdout_every = a.holdout_every;
  const auto all = enumerate_pattern_specs(opts.clutter.grids);
  opts.patterns = select_patterns(all, cls, a.limit);
  const DatasetManifest m = simulate_dataset(opts);
  out << "wrote " << m.records.size() << " records to " << (fs::path(a.common.out) / "manifest.tsv").string() << "\n";
  return kOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string manifest;
  std::string log;
  std::string loss = "rec";
  std::string net = "3d";
  int epochs = 20;
  double lr = 1e-4;
  int batch = 2;
  int levels = 3;
  int base = 16;
  double dropout = 0.05;
  bool desk = false;
  bool no_attention = false;
  bool no_residual = false;
};

int train_cmd(const CLI::App& sub, const TrainArgs& a, std::ostream& out) {
  KvConfig kv = load_config(a.common);
  NetConfig net_cfg = NetConfig::from_kv(kv);
  TrainConfig tc;
  tc.lambda_rec = kv.get_double("train.lambda_rec", tc.lambda_rec);
  tc.lambda_adv = kv.get_double("train.lambda_adv", tc.lambda_adv);
  tc.lambda_prc = kv.get_double("train.lambda_prc", tc.lambda_prc);
  tc.epochs = static_cast<int>(kv.get_int("train.epochs", tc.epochs));
  tc.lr = kv.get_double("train.lr", tc.lr);
  tc.batch_size = static_cast<int>(kv.get_int("train.batch_size", tc.batch_size));
  tc.shift_probability = kv.get_double("train.shift_probability", tc.shift_probability);
  tc.perceptual_pretrain_epochs =
      static_cast<int>(kv.get_int("train.perceptual_pretrain_epochs", tc.perceptual_pretrain_epochs));
  reject_unused(kv);

  if (a.desk) {
    net_cfg.levels = NetConfig::desk().levels;
    net_cfg.base_channels = NetConfig::desk().base_channels;
  }
  if (sub.count("--levels")) net_cfg.levels = a.levels;
  if (sub.count("--base")) net_cfg.base_channels = a.base;
  if (sub.count("--dropout")) net_cfg.dropout_rate = static_cast<float>(a.dropout);
  if (a.no_attention) net_cfg.use_attention = false;
  if (a.no_residual) net_cfg.use_residual_skip = false;
  if (a.net == "2d") net_cfg.temporal_kernels = false;
  if (sub.count("--epochs")) tc.epochs = a.epochs;
  if (sub.count("--lr")) tc.lr = a.lr;
  if (sub.count("--batch")) tc.batch_size = a.batch;
  try {
    tc.loss_kind = parse_loss_kind(a.loss);
    net_cfg.validate();
    tc.validate();
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  tc.seed = a.common.seed;
  out << "config digest: " << resolved_digest(sub, kv) << "\n";

  const DatasetManifest m = read_manifest(a.manifest);
  FilterNet net(net_cfg, derive_seed(a.common.seed, {0x4e4554ULL}));
  out << "network: " << net.parameter_count() << " parameters\n";
  const TrainResult res = train(net, m, tc, [&](const EpochLog& e) {
    out << "epoch " << e.epoch << " train " << fmt_double(e.train_loss) << " val " << fmt_double(e.val_loss)
        << " lr " << fmt_double(e.lr) << "\n"
        << std::flush;
  });

  const fs::path weights = a.common.out;
  if (weights.has_parent_path()) fs::create_directories(weights.parent_path());
  save_weights(net.params(), weights);
  {
    std::ofstream cfg(sidecar_path(weights), std::ios::trunc);
    cfg << net_cfg.to_text();
    if (!cfg) throw IoError("cannot write " + sidecar_path(weights).string());
  }
  const fs::path log = a.log.empty() ? fs::path(weights.string() + ".log.csv") : fs::path(a.log);
  write_train_log_csv(res.log, log);
  out << "best epoch " << res.best_epoch << " val " << fmt_double(res.best_val_loss) << "; weights "
      << weights.string() << "\n";
  return kOk;
}

// ------------------------------------------------------------------ filter

struct FilterArgs {
  Common common;
  std::string manifest;
  std::string weights;
  std::string split = "all";
  std::string attention_out;
  bool svd = false;
  std::uint32_t roi = 5;
  std::uint32_t drop = 1;
};

int filter_cmd(const CLI::App& sub, const FilterArgs& a, std::ostream& out) {
  KvConfig kv = load_config(a.common);
  SvdFilterConfig svd_cfg;
  svd_cfg.roi = static_cast<std::uint32_t>(kv.get_int("svd.roi", svd_cfg.roi));
  svd_cfg.drop_count = static_cast<std::uint32_t>(kv.get_int("svd.drop", svd_cfg.drop_count));
  reject_unused(kv);
  if (sub.count("--roi")) svd_cfg.roi = a.roi;
  if (sub.count("--drop")) svd_cfg.drop_count = a.drop;
  if (a.svd == !a.weights.empty()) throw UsageError("filter needs exactly one of --weights or --svd");
  if (a.svd && !a.attention_out.empty()) throw UsageError("--attention-out needs a network (--weights)");
  const std::string digest = resolved_digest(sub, kv);
  out << "config digest: " << digest << "\n";

  const DatasetManifest m = read_manifest(a.manifest);
  const auto records = select_split(m, a.split);
  std::optional<FilterNet> net;
  std::string filter_name = "svd";
  if (!a.svd) {
    net.emplace(read_sidecar(a.weights), 0);
    load_weights(net->params(), a.weights);
    filter_name = net->config().temporal_kernels ? "net3d" : "net2d";
  }

  const fs::path out_dir = a.common.out;
  fs::create_directories(out_dir);
  nlohmann::ordered_json report;
  report["filter"] = filter_name;
  report["config_digest"] = digest;
  if (a.svd) report["svd"] = {{"roi", svd_cfg.roi}, {"drop", svd_cfg.drop_count}};
  report["outputs"] = nlohmann::ordered_json::array();
  std::ofstream timings(out_dir / "timings.tsv", std::ios::trunc);
  timings << "id\tseconds\n";

  for (const ManifestRecord* r : records) {
    const Sequence in = decode_sequence(m.resolve(r->cluttered_path));
    const auto t0 = std::chrono::steady_clock::now();
    Sequence result;
    if (a.svd) {
      svd_cfg.validate(in.dims().frames);
      result = apply_default_sector(svd_filter_sequence(in, svd_cfg));
    } else {
      result = filter_sequence(*net, in);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    encode_sequence(result, out_dir / (r->id + ".stsq"));
    timings << r->id << "\t" << fmt_double(secs) << "\n";
    report["outputs"].push_back(r->id);
    if (!a.attention_out.empty()) {
      if (!net->config().use_attention) throw UsageError("--attention-out: network has no attention gates");
      write_attention_maps(dump_attention(*net, in), fs::path(a.attention_out) / r->id);
    }
  }
  if (!timings) throw IoError("cannot write timings in " + out_dir.string());
  std::ofstream rep(out_dir / "filter_report.json", std::ios::trunc);
  rep << report.dump(2) << "\n";
  if (!rep) throw IoError("cannot write filter report in " + out_dir.string());
  out << "filtered " << records.size() << " sequences with " << filter_name << " into " << out_dir.string() << "\n";
  return kOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::string manifest;
  std::string predictions;
  std::string split = "all";
  std::string filter_name;
  bool force = false;
};

int eval_cmd(const CLI::App& sub, const EvalArgs& a, std::ostream& out) {
  KvConfig kv = load_config(a.common);
  SsimConfig ssim;
  ssim.window = static_cast<int>(kv.get_int("ssim.window", ssim.window));
  ssim.gaussian_sigma = kv.get_double("ssim.sigma", ssim.gaussian_sigma);
  ssim.k1 = kv.get_double("ssim.k1", ssim.k1);
  ssim.k2 = kv.get_double("ssim.k2", ssim.k2);
  ssim.dynamic_range = kv.get_double("ssim.dynamic_range", ssim.dynamic_range);
  reject_unused(kv);
  try {
    ssim.validate();
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  const fs::path report_path = a.common.out;
  if (fs::exists(report_path) && !a.force) {
    throw UsageError("report " + report_path.string() + " exists; pass --force to overwrite");
  }
  const std::string digest = resolved_digest(sub, kv);
  out << "config digest: " << digest << "\n";

  std::string filter = a.filter_name;
  const fs::path filter_report = fs::path(a.predictions) / "filter_report.json";
  if (filter.empty() && fs::exists(filter_report)) {
    std::ifstream in(filter_report);
    filter = nlohmann::json::parse(in).value("filter", "unknown");
  }
  if (filter.empty()) filter = "unknown";

  const DatasetManifest m = read_manifest(a.manifest);
  const EvalReport r = evaluate(m, select_split(m, a.split), a.predictions, filter, digest, ssim);
  if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
  std::ofstream f(report_path, std::ios::trunc);
  f << report_to_json(r);
  if (!f) throw IoError("cannot write " + report_path.string());
  for (const auto& [cls, metrics] : r.aggregates) {
    out << cls << ": mare " << fmt_double(metrics.at("mare").mean) << " ssim2d " << fmt_double(metrics.at("ssim2d").mean)
        << " ssim3d " << fmt_double(metrics.at("ssim3d").mean) << "\n";
  }
  return kOk;
}

// ------------------------------------------------------------------ verify

int verify_cmd(const CLI::App& sub, const Common& c, std::ostream& out) {
  const KvConfig kv = load_config(c);
  reject_unused(kv);
  out << "config digest: " << resolved_digest(sub, kv) << "\n";
  bool ok = true;
  for (const auto& r : run_verification(VerifyHooks::defaults(), c.seed)) {
    ok = ok && r.passed;
    out << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.detail.empty()) out << "  (" << r.detail << ")";
    out << "\n";
  }
  out << (ok ? "all checks passed" : "verification FAILED") << "\n";
  return ok ? kOk : kVerifyFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clutter simulation, filtering and evaluation for echocardiography sequences", "echoclutter"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate phantom/clutter training pairs and a manifest");
  add_common(s, sim.common, true);
  s->add_option("--class", sim.cls, "nf, rl, nfrl or all")->capture_default_str();
  s->add_option("--limit", sim.limit, "Evenly thinned pattern count (0 = every pattern)")->capture_default_str();
  s->add_option("--height", sim.height)->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--width", sim.width)->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--frames", sim.frames)->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--holdout-every", sim.holdout_every, "Every n-th record goes to the val split (0 = none)")
      ->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the clutter-filtering network");
  add_common(t, tr.common, true);
  t->add_option("--manifest", tr.manifest)->required()->check(CLI::ExistingFile);
  t->add_option("--log", tr.log, "CSV log path (default <out>.log.csv)");
  t->add_option("--loss", tr.loss, "rec, rec_adv or rec_prc")->capture_default_str();
  t->add_option("--net", tr.net, "3d or 2d (frame-wise kernels)")
      ->capture_default_str()
      ->check(CLI::IsMember({"3d", "2d"}));
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--batch", tr.batch)->capture_default_str();
  t->add_option("--levels", tr.levels)->capture_default_str();
  t->add_option("--base", tr.base, "Channels at the first level")->capture_default_str();
  t->add_option("--dropout", tr.dropout)->capture_default_str();
  t->add_flag("--desk", tr.desk, "Desk-scale network (2 levels, 8 base channels)");
  t->add_flag("--no-attention", tr.no_attention);
  t->add_flag("--no-residual", tr.no_residual);

  FilterArgs fl;
  auto* f = app.add_subcommand("filter", "Filter every manifest input with a trained network or the SVD baseline");
  add_common(f, fl.common, true);
  f->add_option("--manifest", fl.manifest)->required()->check(CLI::ExistingFile);
  f->add_option("--weights", fl.weights)->check(CLI::ExistingFile);
  f->add_option("--split", fl.split, "train, val, test or all")->capture_default_str();
  f->add_option("--attention-out", fl.attention_out, "Directory for per-scale attention maps");
  f->add_flag("--svd", fl.svd, "Use the SVD baseline instead of a network");
  f->add_option("--roi", fl.roi)->capture_default_str();
  f->add_option("--drop", fl.drop, "Leading singular components removed")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predictions against clean references");
  add_common(e, ev.common, true);
  e->add_option("--manifest", ev.manifest)->required()->check(CLI::ExistingFile);
  e->add_option("--pred", ev.predictions, "Directory of <id>.stsq predictions")->required()->check(CLI::ExistingDirectory);
  e->add_option("--split", ev.split, "train, val, test or all")->capture_default_str();
  e->add_option("--filter-name", ev.filter_name, "Label stored in the report");
  e->add_flag("--force", ev.force, "Overwrite an existing report");

  Common ver;
  auto* v = app.add_subcommand("verify", "Run the built-in property and oracle checks");
  add_common(v, ver, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& pe) {
    err << "usage error: " << pe.what() << "\n";
    return kUsage;
  }

  try {
    if (*s) return simulate(*s, sim, out);
    if (*t) return train_cmd(*t, tr, out);
    if (*f) return filter_cmd(*f, fl, out);
    if (*e) return eval_cmd(*e, ev, out);
    if (*v) return verify_cmd(*v, ver, out);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kUsage;
  } catch (const ParameterError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kUsage;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return kDataError;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "error: " << ex.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace echoclutter::cli
