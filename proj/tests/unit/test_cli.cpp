#include <fstream>
#include <set>
#include <sstream>

#include "commands.hpp"
#include "doctest.h"
#include "echoclutter/codec.hpp"
#include "echoclutter/evaluation.hpp"
#include "echoclutter/filter_net.hpp"
#include "echoclutter/manifest.hpp"
#include "echoclutter/ops.hpp"
#include "echoclutter/verification.hpp"
#include "echoclutter/weights_io.hpp"
#include "helpers.hpp"

using namespace echoclutter;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  const auto bytes = read_file_bytes(p);
  return {bytes.begin(), bytes.end()};
}

std::vector<std::string> simulate_args(const fs::path& out, const std::string& cls, int limit) {
  return {"simulate", "--out", out.string(), "--class", cls, "--limit", std::to_string(limit),
          "--height", "32", "--width", "32", "--frames", "4", "--seed", "5"};
}

// Directory trees compared file by file, byte for byte.
bool same_tree(const fs::path& a, const fs::path& b, const std::set<std::string>& skip = {}) {
  std::set<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) names.insert(fs::relative(e.path(), a).string());
  std::size_t count = 0;
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) ++count;
  if (count != names.size()) return false;
  for (const auto& n : names) {
    if (skip.count(fs::path(n).filename().string())) continue;
    if (!fs::exists(b / n) || slurp(a / n) != slurp(b / n)) return false;
  }
  return true;
}

void write_identity_net(const fs::path& weights, NetConfig cfg) {
  FilterNet net(cfg, 1);
  save_weights(net.params(), weights);
  std::ofstream(weights.string() + ".cfg") << cfg.to_text();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with code 1") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"bogus"}).code == cli::kUsage);
  CHECK(run({"simulate"}).code == cli::kUsage);
  TempDir dir;
  CHECK(run({"simulate", "--out", (dir / "x").string(), "--class", "xx"}).code == cli::kUsage);
  CHECK(run({"simulate", "--out", (dir / "x").string(), "--unknown"}).code == cli::kUsage);
  CHECK(run({"verify", "--config", (dir / "missing.cfg").string()}).code == cli::kUsage);
  std::ofstream(dir / "bad.cfg") << "nonsense.key = 3\n";
  const Result r = run({"verify", "--config", (dir / "bad.cfg").string()});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("nonsense.key") != std::string::npos);
  CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("simulate writes one record per near-field pattern") {
  TempDir dir;
  const Result r = run(simulate_args(dir / "d", "nf", 18));
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("config digest: ") == 0);
  const DatasetManifest m = read_manifest(dir / "d" / "manifest.tsv");
  REQUIRE(m.records.size() == 18);
  std::set<int> ids;
  for (const auto& rec : m.records) ids.insert(rec.pattern_id);
  CHECK(ids.size() == 18);
  CHECK(*ids.rbegin() == 17);
  CHECK_NOTHROW(m.validate(true));
}

TEST_CASE("simulate with every class instantiates all 534 patterns") {
  TempDir dir;
  REQUIRE(run({"simulate", "--out", (dir / "d").string(), "--height", "32", "--width", "32", "--frames", "2"}).code ==
          cli::kOk);
  const DatasetManifest m = read_manifest(dir / "d" / "manifest.tsv");
  CHECK(m.records.size() == 534);
}

TEST_CASE("simulate is deterministic per seed") {
  TempDir dir;
  REQUIRE(run(simulate_args(dir / "a", "all", 12)).code == cli::kOk);
  REQUIRE(run(simulate_args(dir / "b", "all", 12)).code == cli::kOk);
  CHECK(same_tree(dir / "a", dir / "b"));
  auto other = simulate_args(dir / "c", "all", 12);
  other.back() = "6";
  REQUIRE(run(other).code == cli::kOk);
  CHECK_FALSE(same_tree(dir / "a", dir / "c"));
}

TEST_CASE("train, filter and eval chain") {
  TempDir dir;
  REQUIRE(run(simulate_args(dir / "d", "nf", 8)).code == cli::kOk);
  const std::string manifest = (dir / "d" / "manifest.tsv").string();
  const Result tr = run({"train", "--manifest", manifest, "--out", (dir / "w.bin").string(), "--levels", "1", "--base",
                         "2", "--epochs", "2", "--lr", "1e-3", "--seed", "1"});
  REQUIRE(tr.code == cli::kOk);
  CHECK(tr.out.find("epoch 2 train") != std::string::npos);
  CHECK(fs::exists(dir / "w.bin.cfg"));
  const std::string log = slurp(dir / "w.bin.log.csv");
  CHECK(log.rfind("epoch,train_loss,val_loss,lr\n", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);

  const Result fl = run({"filter", "--manifest", manifest, "--weights", (dir / "w.bin").string(), "--out",
                         (dir / "pred").string(), "--attention-out", (dir / "att").string()});
  REQUIRE(fl.code == cli::kOk);
  CHECK(fs::exists(dir / "pred" / "timings.tsv"));
  const DatasetManifest m = read_manifest(manifest);
  for (const auto& rec : m.records) {
    CHECK(decode_sequence(dir / "pred" / (rec.id + ".stsq")).dims() == Dims{32, 32, 4});
    CHECK(fs::exists(dir / "att" / rec.id / "scale1_intermediate.stsq"));
    CHECK(fs::exists(dir / "att" / rec.id / "scale1_final.stsq"));
    CHECK_FALSE(fs::exists(dir / "att" / rec.id / "scale2_final.stsq"));
  }

  const std::string report = (dir / "report.json").string();
  const std::vector<std::string> eval{"eval", "--manifest", manifest, "--pred", (dir / "pred").string(), "--out",
                                      report};
  REQUIRE(run(eval).code == cli::kOk);
  const EvalReport r = report_from_json(slurp(report));
  CHECK(r.filter == "net3d");
  CHECK(r.rows.size() == 8);
  // An existing report is kept unless --force is given.
  const Result again = run(eval);
  CHECK(again.code == cli::kUsage);
  CHECK(again.err.find("--force") != std::string::npos);
  auto forced = eval;
  forced.push_back("--force");
  CHECK(run(forced).code == cli::kOk);

  fs::remove(dir / "pred" / (m.records[0].id + ".stsq"));
  const Result missing = run(forced);
  CHECK(missing.code == cli::kDataError);
  CHECK(missing.err.find(m.records[0].id) != std::string::npos);
}

TEST_CASE("the svd baseline and perfect predictions") {
  TempDir dir;
  REQUIRE(run(simulate_args(dir / "d", "rl", 4)).code == cli::kOk);
  const std::string manifest = (dir / "d" / "manifest.tsv").string();
  REQUIRE(run({"filter", "--manifest", manifest, "--svd", "--roi", "4", "--drop", "1", "--out",
               (dir / "svd").string()})
              .code == cli::kOk);
  CHECK(slurp(dir / "svd" / "filter_report.json").find("\"roi\": 4") != std::string::npos);
  CHECK(run({"filter", "--manifest", manifest, "--out", (dir / "x").string()}).code == cli::kUsage);
  CHECK(run({"filter", "--manifest", manifest, "--svd", "--drop", "9", "--out", (dir / "x").string()}).code ==
        cli::kUsage);

  // Clean sequences as predictions score perfectly.
  fs::create_directories(dir / "perfect");
  const DatasetManifest m = read_manifest(manifest);
  for (const auto& rec : m.records) fs::copy_file(m.resolve(rec.clean_path), dir / "perfect" / (rec.id + ".stsq"));
  REQUIRE(run({"eval", "--manifest", manifest, "--pred", (dir / "perfect").string(), "--out",
               (dir / "r.json").string(), "--filter-name", "clean"})
              .code == cli::kOk);
  const EvalReport r = report_from_json(slurp(dir / "r.json"));
  CHECK(r.filter == "clean");
  for (const auto& row : r.rows) {
    CHECK(row.mare == 0.0);
    CHECK(std::abs(row.ssim3d - 1.0) <= 1e-9);
  }
  CHECK(r.aggregates.count("RL") == 1);
}

TEST_CASE("a residual-identity network maps an all-zero sequence to zero") {
  TempDir dir;
  fs::create_directories(dir / "d");
  const Sequence zero = Sequence::zeros({16, 16, 4});
  encode_sequence(zero, dir / "d" / "z.stsq");
  DatasetManifest m;
  m.records.push_back({"z", "z.stsq", "z.stsq", "z.stsq", 0, 0, "test"});
  write_manifest(m, dir / "d" / "manifest.tsv");
  write_identity_net(dir / "w.bin", NetConfig::desk());
  REQUIRE(run({"filter", "--manifest", (dir / "d" / "manifest.tsv").string(), "--weights", (dir / "w.bin").string(),
               "--out", (dir / "p").string()})
              .code == cli::kOk);
  CHECK(decode_sequence(dir / "p" / "z.stsq") == zero);
}

TEST_CASE("broken inputs are data errors") {
  TempDir dir;
  fs::create_directories(dir / "d");
  std::ofstream(dir / "d" / "bad.stsq") << "not a sequence";
  DatasetManifest m;
  m.records.push_back({"b", "bad.stsq", "bad.stsq", "bad.stsq", 0, 0, "test"});
  write_manifest(m, dir / "d" / "manifest.tsv");
  const Result r =
      run({"filter", "--manifest", (dir / "d" / "manifest.tsv").string(), "--svd", "--out", (dir / "p").string()});
  CHECK(r.code == cli::kDataError);
  CHECK(r.err.find("bad.stsq") != std::string::npos);

  NetConfig no_att = NetConfig::desk();
  no_att.use_attention = false;
  write_identity_net(dir / "w.bin", no_att);
  encode_sequence(Sequence::zeros({16, 16, 2}), dir / "d" / "bad.stsq");
  CHECK(run({"filter", "--manifest", (dir / "d" / "manifest.tsv").string(), "--weights", (dir / "w.bin").string(),
             "--out", (dir / "p").string(), "--attention-out", (dir / "a").string()})
            .code == cli::kUsage);
  fs::remove(dir / "w.bin.cfg");
  CHECK(run({"filter", "--manifest", (dir / "d" / "manifest.tsv").string(), "--weights", (dir / "w.bin").string(),
             "--out", (dir / "p").string()})
            .code == cli::kDataError);
}

TEST_CASE("the pipeline is reproducible end to end") {
  TempDir dir;
  auto pipeline = [&](const fs::path& root) {
    REQUIRE(run(simulate_args(root / "d", "all", 6)).code == cli::kOk);
    const std::string manifest = (root / "d" / "manifest.tsv").string();
    REQUIRE(run({"train", "--manifest", manifest, "--out", (root / "w.bin").string(), "--levels", "1", "--base", "2",
                 "--epochs", "2", "--seed", "3"})
                .code == cli::kOk);
    REQUIRE(run({"filter", "--manifest", manifest, "--weights", (root / "w.bin").string(), "--out",
                 (root / "p").string()})
                .code == cli::kOk);
    REQUIRE(run({"eval", "--manifest", manifest, "--pred", (root / "p").string(), "--out",
                 (root / "r.json").string()})
                .code == cli::kOk);
  };
  pipeline(dir / "one");
  pipeline(dir / "two");
  CHECK(same_tree(dir / "one", dir / "two", {"timings.tsv"}));
}

TEST_CASE("verify passes on the shipped implementation") {
  const Result r = run({"verify"});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("all checks passed") != std::string::npos);
}

TEST_CASE("verification catches a wrong pooling tie-break") {
  VerifyHooks hooks = VerifyHooks::defaults();
  // Same window maxima, but gradients go to the last maximum of each window.
  hooks.maxpool = [](const Var& x) {
    const Shape& s = x->shape();
    Tensor y(Shape{s[0], s[1], s[2] / 2, s[3] / 2, s[4]});
    std::vector<std::size_t> winner(y.numel());
    std::size_t k = 0;
    for (std::size_t n = 0; n < s[0]; ++n)
      for (std::size_t c = 0; c < s[1]; ++c)
        for (std::size_t h = 0; h < s[2]; h += 2)
          for (std::size_t w = 0; w < s[3]; w += 2)
            for (std::size_t f = 0; f < s[4]; ++f, ++k) {
              std::size_t best = x->value.offset5(n, c, h, w, f);
              for (std::size_t dh = 0; dh < 2; ++dh)
                for (std::size_t dw = 0; dw < 2; ++dw) {
                  const std::size_t i = x->value.offset5(n, c, h + dh, w + dw, f);
                  if (x->value[i] >= x->value[best]) best = i;
                }
              winner[k] = best;
            }
    // Outputs are laid out (n, c, h/2, w/2, f), matching the loop order above.
    for (std::size_t i = 0; i < winner.size(); ++i) y[i] = x->value[winner[i]];
    return make_result(std::move(y), {x}, [x, winner](Variable& self) {
      Tensor& g = x->grad_buffer();
      for (std::size_t i = 0; i < winner.size(); ++i) g[winner[i]] += self.grad[i];
    });
  };
  bool saw = false;
  for (const auto& r : run_verification(hooks, 1)) {
    if (r.name == "maxpool oracle") {
      saw = true;
      CHECK_FALSE(r.passed);
    }
  }
  CHECK(saw);
}

TEST_CASE("verification catches a wrong ssim constant") {
  VerifyHooks hooks = VerifyHooks::defaults();
  hooks.ssim2d = [](const Sequence& a, const Sequence& b, const SsimConfig& cfg) {
    SsimConfig wrong = cfg;
    wrong.k2 = 0.3;
    return ssim2d(a, b, wrong);
  };
  bool saw = false;
  for (const auto& r : run_verification(hooks, 1)) {
    if (r.name == "ssim oracle") {
      saw = true;
      CHECK_FALSE(r.passed);
    }
  }
  CHECK(saw);
}

}  // TEST_SUITE
