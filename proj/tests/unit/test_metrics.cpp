#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "echoclutter/codec.hpp"
#include "echoclutter/dataset.hpp"
#include "echoclutter/error.hpp"
#include "echoclutter/evaluation.hpp"
#include "echoclutter/geometry.hpp"
#include "echoclutter/metrics.hpp"
#include "echoclutter/reference.hpp"
#include "helpers.hpp"

using namespace echoclutter;
using testing_support::random_sequence;
using testing_support::TempDir;

namespace {

Sequence from_fn(Dims d, const std::function<float(std::uint32_t, std::uint32_t, std::uint32_t)>& fn) {
  std::vector<float> v(d.size());
  for (std::uint32_t f = 0; f < d.frames; ++f)
    for (std::uint32_t r = 0; r < d.height; ++r)
      for (std::uint32_t c = 0; c < d.width; ++c) v[(f * d.height + r) * d.width + c] = fn(f, r, c);
  return Sequence(d, std::move(v));
}

// Smooth blob drifting one pixel per frame.
Sequence moving_blob(Dims d) {
  return from_fn(d, [&](std::uint32_t f, std::uint32_t r, std::uint32_t c) {
    const double dr = r - 0.5 * d.height, dc = c - 4.0 - f;
    return static_cast<float>(0.1 + 0.8 * std::exp(-(dr * dr + dc * dc) / 40.0));
  });
}

Sequence add_noise(const Sequence& s, Rng& rng, double sigma) {
  std::vector<float> v(s.values().begin(), s.values().end());
  for (float& x : v) x = std::clamp(x + static_cast<float>(sigma * rng.normal()), 0.0F, 1.0F);
  return Sequence(s.dims(), std::move(v));
}

Sequence permute(const Sequence& s, const std::vector<std::uint32_t>& perm) {
  return from_fn(s.dims(), [&](std::uint32_t f, std::uint32_t r, std::uint32_t c) { return s.at(perm[f], r, c); });
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("mare of identical sequences is zero") {
  Rng rng(1);
  const Sequence a = random_sequence(rng, {8, 8, 3});
  CHECK(mare(a, a) == 0.0);
}

TEST_CASE("a uniform difference of 0.1 costs 25.5") {
  const Sequence a(Dims{4, 4, 2}, std::vector<float>(32, 0.3F));
  const Sequence b(Dims{4, 4, 2}, std::vector<float>(32, 0.4F));
  CHECK(mare(a, b) == doctest::Approx(25.5).epsilon(1e-5));
  CHECK_THROWS_AS(mare(a, Sequence::zeros({4, 4, 3})), DimensionError);
}

TEST_CASE("mare matches the direct loop and obeys the triangle inequality") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Dims d{1 + static_cast<std::uint32_t>(rng.below(20)), 1 + static_cast<std::uint32_t>(rng.below(20)),
                 1 + static_cast<std::uint32_t>(rng.below(6))};
    const Sequence a = random_sequence(rng, d), b = random_sequence(rng, d), c = random_sequence(rng, d);
    CHECK(mare(a, b) == doctest::Approx(reference::mare(a, b)).epsilon(1e-9));
    CHECK(mare(a, c) <= mare(a, b) + mare(b, c) + 1e-6);
    CHECK(mare(a, b) == doctest::Approx(mare(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("gaussian window is normalized and symmetric") {
  const auto w = gaussian_window(11, 1.5);
  REQUIRE(w.size() == 11);
  double s = 0.0;
  for (double x : w) s += x;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  for (int i = 0; i < 5; ++i) CHECK(w[i] == doctest::Approx(w[10 - i]).epsilon(1e-15));
  CHECK(w[5] / w[6] == doctest::Approx(std::exp(0.5 / 2.25)).epsilon(1e-12));
}

TEST_CASE("ssim of a sequence with itself is one") {
  Rng rng(3);
  const Sequence a = random_sequence(rng, {32, 32, 12});
  CHECK(std::abs(ssim2d(a, a) - 1.0) <= 1e-9);
  CHECK(std::abs(ssim3d(a, a) - 1.0) <= 1e-9);
  const Sequence sparse = from_fn({24, 24, 4}, [](auto f, auto r, auto c) { return r > 15 && c < 5 ? 0.2F * f : 0.0F; });
  CHECK(std::abs(ssim2d(sparse, sparse) - 1.0) <= 1e-9);
}

TEST_CASE("constant patches scaled by one half follow the closed form") {
  const float c = 0.6F;
  const Sequence a(Dims{16, 16, 2}, std::vector<float>(512, c));
  const Sequence b(Dims{16, 16, 2}, std::vector<float>(512, 0.5F * c));
  const SsimConfig cfg;
  const double mx = 255.0 * c, my = 127.5 * c;
  const double expect = (2 * mx * my + cfg.c1()) / (mx * mx + my * my + cfg.c1());
  CHECK(ssim2d(a, b) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(ssim3d(a, b) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("ssim matches the direct implementation") {
  Rng rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    const Sequence a = random_sequence(rng, {32, 32, 12});
    const Sequence b = add_noise(a, rng, 0.2);
    CHECK(ssim2d(a, b) == doctest::Approx(reference::ssim2d(a, b)).epsilon(1e-6));
    CHECK(ssim3d(a, b) == doctest::Approx(reference::ssim3d(a, b)).epsilon(1e-6));
  }
  // Short sequences use a shrunken temporal window.
  const Sequence a = random_sequence(rng, {16, 20, 5}), b = random_sequence(rng, {16, 20, 5});
  const SsimResult r = ssim3d_detail(a, b);
  CHECK(r.temporal_window == 5);
  CHECK(r.value == doctest::Approx(reference::ssim3d(a, b)).epsilon(1e-6));
  CHECK(ssim2d_detail(a, b).temporal_window == 1);
  // Odd window, other constants.
  SsimConfig cfg;
  cfg.window = 7;
  cfg.gaussian_sigma = 1.0;
  CHECK(ssim2d(a, b, cfg) == doctest::Approx(reference::ssim2d(a, b, cfg)).epsilon(1e-6));
  CHECK(ssim3d(a, b, cfg) == doctest::Approx(reference::ssim3d(a, b, cfg)).epsilon(1e-6));
}

TEST_CASE("sector-restricted ssim skips zero patch pairs") {
  Rng rng(5);
  const Dims d{64, 64, 3};
  const BinaryImage sector = sector_mask(SectorGeometry::default_for(64, 64), 64, 64);
  const Sequence a = random_sequence(rng, d), b = random_sequence(rng, d);
  const SsimResult r2 = ssim2d_detail(a, b, {}, &sector);
  CHECK(r2.patches_excluded > 0);
  CHECK(r2.patches_included + r2.patches_excluded == 54u * 54u * 3u);
  CHECK(r2.value == doctest::Approx(reference::ssim2d(a, b, {}, &sector)).epsilon(1e-6));
  CHECK(ssim3d(a, b, {}, &sector) == doctest::Approx(reference::ssim3d(a, b, {}, &sector)).epsilon(1e-6));
}

TEST_CASE("ssim is symmetric and bounded by one") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const Sequence a = random_sequence(rng, {20, 24, 11}), b = add_noise(a, rng, 0.1 * (trial + 1));
    CHECK(std::abs(ssim2d(a, b) - ssim2d(b, a)) <= 1e-9);
    CHECK(std::abs(ssim3d(a, b) - ssim3d(b, a)) <= 1e-9);
    CHECK(ssim2d(a, b) <= 1.0);
    CHECK(ssim3d(a, b) <= 1.0);
  }
}

TEST_CASE("frame-wise re-noising hurts the space-time index more") {
  // Each frame gets its own low-frequency disturbance: invisible to per-frame
  // structure, but incoherent along time.
  Rng rng(7);
  for (const Sequence& ref : {moving_blob({32, 32, 16}), random_sequence(rng, {32, 32, 16})}) {
    std::vector<float> v(ref.values().begin(), ref.values().end());
    const std::size_t fs = ref.dims().frame_size();
    for (std::uint32_t f = 0; f < ref.dims().frames; ++f) {
      const float offset = static_cast<float>(0.08 * rng.normal());
      for (std::size_t i = 0; i < fs; ++i) {
        float& x = v[f * fs + i];
        x = std::clamp(x + offset + static_cast<float>(0.01 * rng.normal()), 0.0F, 1.0F);
      }
    }
    const Sequence noisy(ref.dims(), std::move(v));
    CHECK(ssim3d(ref, noisy) < ssim2d(ref, noisy));
  }
}

TEST_CASE("temporal shuffling lowers ssim3d and leaves ssim2d alone") {
  // Static reference against a prediction whose distortion drifts slowly.
  const Dims d{24, 24, 24};
  const Sequence ref = from_fn(d, [](auto, auto r, auto c) { return 0.3F + 0.02F * ((r + c) % 7); });
  const Sequence pred = from_fn(d, [&](auto f, auto r, auto c) {
    return ref.at(f, r, c) + 0.2F * static_cast<float>(f) / 24.0F * std::sin(0.7F * r) * std::cos(0.4F * c);
  });
  std::vector<std::uint32_t> perm(24);
  for (std::uint32_t f = 0; f < 24; ++f) perm[f] = (f * 7) % 24;
  const Sequence shuffled = permute(pred, perm);
  CHECK(ssim2d(ref, shuffled) == doctest::Approx(ssim2d(ref, pred)).epsilon(1e-12));
  CHECK(ssim3d(ref, shuffled) < ssim3d(ref, pred));
}

TEST_CASE("all-zero inputs leave the metric undefined") {
  const Sequence z = Sequence::zeros({16, 16, 3});
  CHECK_THROWS_AS(ssim2d(z, z), UndefinedMetricError);
  CHECK_THROWS_AS(ssim3d(z, z), UndefinedMetricError);
  CHECK_THROWS_AS(ssim2d(z, Sequence::zeros({8, 8, 3})), DimensionError);
  SsimConfig even;
  even.window = 10;
  CHECK_THROWS_AS(even.validate(), ParameterError);
}

TEST_CASE("mean and sample deviation") {
  const MeanStd m = mean_std({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == 2.5);
  CHECK(m.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
  CHECK(mean_std({7.0}).std == 0.0);
}

TEST_CASE("evaluation of perfect predictions") {
  TempDir dir;
  SimulateOptions opts;
  opts.out_dir = dir.path() / "data";
  opts.seed = 3;
  opts.dims = {32, 32, 4};
  const auto all = enumerate_pattern_specs();
  for (auto cls : {ClutterClass::NF, ClutterClass::RL, ClutterClass::NFRL}) {
    for (const auto& s : select_patterns(all, cls, cls == ClutterClass::RL ? 3 : 2)) opts.patterns.push_back(s);
  }
  const DatasetManifest m = simulate_dataset(opts);
  std::filesystem::create_directories(dir / "pred");
  std::vector<const ManifestRecord*> recs;
  for (const auto& r : m.records) {
    recs.push_back(&r);
    encode_sequence(decode_sequence(m.resolve(r.clean_path)), dir / "pred" / (r.id + ".stsq"));
  }
  const EvalReport rep = evaluate(m, recs, dir / "pred", "oracle", "abc");
  REQUIRE(rep.rows.size() == 7);
  for (const EvalRow& row : rep.rows) {
    CHECK(row.mare == 0.0);
    CHECK(std::abs(row.ssim2d - 1.0) <= 1e-9);
    CHECK(std::abs(row.ssim3d - 1.0) <= 1e-9);
  }
  std::map<std::string, std::size_t> counts;
  for (const EvalRow& row : rep.rows) ++counts[row.cls];
  CHECK(counts["NF"] == 2);
  CHECK(counts["RL"] == 3);
  CHECK(counts["NF_RL"] == 2);
  for (const auto& r : m.records) {
    const auto it = std::find_if(rep.rows.begin(), rep.rows.end(), [&](const EvalRow& e) { return e.id == r.id; });
    REQUIRE(it != rep.rows.end());
    CHECK(it->cls == pattern_class_name(r.pattern_id));
  }

  EvalReport again = rep;
  again.aggregates.clear();
  recompute_aggregates(again);
  CHECK(again.aggregates == rep.aggregates);
  CHECK(rep.aggregates.at("RL").at("mare").mean == 0.0);

  const EvalReport parsed = report_from_json(report_to_json(rep));
  CHECK(parsed.filter == "oracle");
  CHECK(parsed.config_digest == "abc");
  CHECK(report_to_json(parsed) == report_to_json(rep));

  std::filesystem::remove(dir / "pred" / (m.records[1].id + ".stsq"));
  std::filesystem::remove(dir / "pred" / (m.records[4].id + ".stsq"));
  try {
    evaluate(m, recs, dir / "pred", "oracle", "abc");
    FAIL("expected MissingPredictionError");
  } catch (const MissingPredictionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(m.records[1].id) != std::string::npos);
    CHECK(msg.find(m.records[4].id) != std::string::npos);
  }
}

TEST_CASE("scored pairs use the default sector") {
  Rng rng(8);
  const Sequence ref = random_sequence(rng, {32, 32, 12});
  Sequence pred = add_noise(ref, rng, 0.1);
  const EvalRow row = score_pair("x", 0, ref, pred);
  const BinaryImage sector = sector_mask(SectorGeometry::default_for(32, 32), 32, 32);
  CHECK(row.cls == "NF");
  CHECK(row.ssim2d == doctest::Approx(ssim2d(ref, pred, {}, &sector)).epsilon(1e-12));
  CHECK(row.ssim3d == doctest::Approx(ssim3d(ref, pred, {}, &sector)).epsilon(1e-12));
}

TEST_CASE("reports reject malformed json") {
  CHECK_THROWS_AS(report_from_json("{\"filter\": 3"), FormatError);
  CHECK_THROWS_AS(report_from_json("[]"), FormatError);
}

}  // TEST_SUITE
