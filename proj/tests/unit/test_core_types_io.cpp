#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "echoclutter/codec.hpp"
#include "echoclutter/error.hpp"
#include "echoclutter/geometry.hpp"
#include "echoclutter/kv_config.hpp"
#include "echoclutter/manifest.hpp"
#include "echoclutter/phantom.hpp"
#include "echoclutter/reference.hpp"
#include "helpers.hpp"

using namespace echoclutter;
using le::get_f32;
using le::get_u32;
using testing_support::random_sequence;
using testing_support::TempDir;

TEST_SUITE("core_types_io") {

TEST_CASE("sequence invariants are enforced at construction") {
  CHECK_THROWS_AS(Sequence(Dims{0, 0, 0}, {}), DimensionError);
  CHECK_THROWS_AS(Sequence(Dims{1, 1, 0}, {}), DimensionError);
  CHECK_THROWS_AS(Sequence(Dims{2, 2, 1}, {0.F, 0.F, 0.F}), DimensionError);
  CHECK_THROWS_AS(Sequence(Dims{1, 1, 1}, {1.5F}), RangeError);
  CHECK_THROWS_AS(Sequence(Dims{1, 1, 1}, {-0.25F}), RangeError);
  CHECK_THROWS_AS(Sequence(Dims{1, 1, 1}, {std::numeric_limits<float>::quiet_NaN()}), RangeError);
  CHECK_THROWS_AS(Sequence(Dims{1, 1, 1}, {std::numeric_limits<float>::infinity()}), RangeError);
  CHECK_NOTHROW(Sequence(Dims{1, 1, 2}, {0.F, 1.F}));
}

TEST_CASE("clamped maps every value into [0,1]") {
  Volume v(Dims{1, 2, 2}, {-1.F, 0.5F, 2.F, std::numeric_limits<float>::quiet_NaN()});
  const Sequence s = Sequence::clamped(v);
  CHECK(s.values()[0] == 0.F);
  CHECK(s.values()[1] == 0.5F);
  CHECK(s.values()[2] == 1.F);
  CHECK(s.values()[3] == 0.F);
}

TEST_CASE("smallest sequence encodes to a 25 byte file with the documented layout") {
  const Sequence s(Dims{1, 1, 1}, {0.5F});
  const auto bytes = encode_sequence_bytes(s);
  REQUIRE(bytes.size() == 25);
  CHECK(std::memcmp(bytes.data(), "STSQ", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(get_u32(bytes.data() + 5) == 1);
  CHECK(get_u32(bytes.data() + 9) == 1);
  CHECK(get_u32(bytes.data() + 13) == 1);
  CHECK(get_u32(bytes.data() + 17) == 1);
  // 0.5f = 0x3f000000, little-endian
  CHECK(bytes[21] == 0x00);
  CHECK(bytes[22] == 0x00);
  CHECK(bytes[23] == 0x00);
  CHECK(bytes[24] == 0x3f);
}

TEST_CASE("header fields are little-endian and frame-major") {
  std::vector<float> v(3 * 2 * 4);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i) / 32.F;
  const Sequence s(Dims{3, 2, 4}, v);
  const auto bytes = encode_sequence_bytes(s);
  CHECK(bytes[5] == 3);
  CHECK(bytes[9] == 2);
  CHECK(bytes[13] == 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(get_f32(bytes.data() + kStsqHeaderSize + 4 * i) == v[i]);
  }
}

TEST_CASE("empty sequence is rejected before anything is written") {
  TempDir dir;
  CHECK_THROWS_AS(encode_sequence(Sequence(), dir / "empty.stsq"), DimensionError);
  CHECK_FALSE(std::filesystem::exists(dir / "empty.stsq"));
}

TEST_CASE("payload one value short reports expected and actual byte counts") {
  auto bytes = encode_sequence_bytes(Sequence::zeros(Dims{2, 2, 2}));
  bytes.resize(bytes.size() - 4);
  try {
    decode_sequence_bytes(bytes, "short.stsq");
    FAIL("expected LengthError");
  } catch (const LengthError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("53") != std::string::npos);
    CHECK(msg.find("49") != std::string::npos);
    CHECK(msg.find("short.stsq") != std::string::npos);
  }
}

TEST_CASE("trailing bytes are a length error too") {
  auto bytes = encode_sequence_bytes(Sequence::zeros(Dims{1, 1, 1}));
  bytes.push_back(0);
  CHECK_THROWS_AS(decode_sequence_bytes(bytes), LengthError);
}

TEST_CASE("bad magic, version and dtype are format errors") {
  const auto good = encode_sequence_bytes(Sequence::zeros(Dims{1, 2, 1}));
  auto magic = good;
  std::memcpy(magic.data(), "XXXX", 4);
  CHECK_THROWS_AS(decode_sequence_bytes(magic), FormatError);
  auto version = good;
  version[4] = 2;
  CHECK_THROWS_AS(decode_sequence_bytes(version), FormatError);
  auto dtype = good;
  dtype[17] = 2;
  CHECK_THROWS_AS(decode_sequence_bytes(dtype), FormatError);
  CHECK_THROWS_AS(decode_sequence_bytes(std::vector<std::uint8_t>(10, 0)), LengthError);
}

TEST_CASE("out-of-range payload values are range errors") {
  auto bytes = encode_sequence_bytes(Sequence::zeros(Dims{1, 1, 2}));
  const float bad = 1.25F;
  std::memcpy(bytes.data() + kStsqHeaderSize + 4, &bad, 4);
  CHECK_THROWS_AS(decode_sequence_bytes(bytes), RangeError);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + kStsqHeaderSize + 4, &nan, 4);
  CHECK_THROWS_AS(decode_sequence_bytes(bytes), RangeError);
}

TEST_CASE("missing file is an io error naming the path") {
  TempDir dir;
  try {
    decode_sequence(dir / "nope.stsq");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("nope.stsq") != std::string::npos);
  }
}

TEST_CASE("codec round-trip is bit-exact for random sequences") {
  TempDir dir;
  Rng rng(20240611);
  for (int trial = 0; trial < 25; ++trial) {
    const Dims d{static_cast<std::uint32_t>(1 + rng.below(17)), static_cast<std::uint32_t>(1 + rng.below(17)),
                 static_cast<std::uint32_t>(1 + rng.below(9))};
    std::vector<float> v(d.size());
    for (float& x : v) {
      // Mix in the awkward corners of [0,1].
      switch (rng.below(6)) {
        case 0: x = 0.0F; break;
        case 1: x = -0.0F; break;
        case 2: x = std::numeric_limits<float>::denorm_min(); break;
        case 3: x = std::nextafter(1.0F, 0.0F); break;
        default: x = static_cast<float>(rng.uniform());
      }
    }
    const Sequence s(d, v);
    const auto path = dir / ("r" + std::to_string(trial) + ".stsq");
    encode_sequence(s, path);
    const Sequence back = decode_sequence(path);
    REQUIRE(back.dims() == d);
    for (std::size_t i = 0; i < v.size(); ++i) {
      REQUIRE(std::bit_cast<std::uint32_t>(back.values()[i]) == std::bit_cast<std::uint32_t>(v[i]));
    }
    CHECK(peek_sequence_dims(path) == d);
  }
}

TEST_CASE("round-trip of a full-size phantom is bit-identical") {
  TempDir dir;
  const auto cfg = PhantomConfig::default_for(128, 128);
  const Sequence s = generate_phantom(cfg, 50, 3);
  encode_sequence(s, dir / "p.stsq");
  const auto bytes = read_file_bytes(dir / "p.stsq");
  CHECK(bytes.size() == kStsqHeaderSize + 4 * s.size());
  CHECK(decode_sequence(dir / "p.stsq") == s);
  CHECK(encode_sequence_bytes(decode_sequence(dir / "p.stsq")) == bytes);
}

TEST_CASE("default geometry and calibration") {
  const auto g = SectorGeometry::default_for(64, 48);
  CHECK(g.apex_row == 0.0);
  CHECK(g.apex_col == 24.0);
  CHECK(g.half_angle_deg == 45.0);
  CHECK(g.radius == 64.0);
  CHECK_NOTHROW(g.validate());
  SectorGeometry bad = g;
  bad.half_angle_deg = 90.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad.half_angle_deg = 0.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  PhysicalCalibration cal;
  CHECK_NOTHROW(cal.validate());
  cal.cm_per_pixel = 0.0;
  CHECK_THROWS_AS(cal.validate(), ParameterError);
}

TEST_CASE("sector mask with a large radius is left/right symmetric") {
  for (std::uint32_t w : {32U, 33U, 64U, 101U}) {
    SectorGeometry g = SectorGeometry::default_for(64, w);
    g.radius = 1000.0;
    const BinaryImage m = sector_mask(g, 64, w);
    CHECK(m.count() > 0);
    for (std::uint32_t r = 0; r < 64; ++r)
      for (std::uint32_t c = 0; c < w; ++c) REQUIRE(m.at(r, c) == m.at(r, w - 1 - c));
    // Cone widens with depth.
    for (std::uint32_t r = 1; r < 64; ++r) {
      std::size_t prev = 0, cur = 0;
      for (std::uint32_t c = 0; c < w; ++c) {
        prev += m.at(r - 1, c);
        cur += m.at(r, c);
      }
      CHECK(cur >= prev);
    }
  }
}

TEST_CASE("sector mask collapses to the apex column as the half angle vanishes") {
  SectorGeometry g = SectorGeometry::default_for(40, 33);
  g.half_angle_deg = 1e-6;
  const BinaryImage m = sector_mask(g, 40, 33);
  for (std::uint32_t r = 0; r < 40; ++r)
    for (std::uint32_t c = 0; c < 33; ++c) CHECK(m.at(r, c) == (c == 16 ? 1 : 0));
}

TEST_CASE("degenerate geometry gives an all-zero mask") {
  SectorGeometry g = SectorGeometry::default_for(16, 16);
  g.radius = 0.0;
  CHECK(sector_mask(g, 16, 16).count() == 0);
  g = SectorGeometry::default_for(16, 16);
  g.half_angle_deg = 95.0;
  CHECK(sector_mask(g, 16, 16).count() == 0);
}

TEST_CASE("sector mask matches the polar oracle on randomized geometries") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto h = static_cast<std::uint32_t>(4 + rng.below(80));
    const auto w = static_cast<std::uint32_t>(4 + rng.below(80));
    SectorGeometry g;
    // Apex on the border or inside, sometimes exactly on pixel corners.
    g.apex_row = rng.bernoulli(0.5) ? 0.0 : rng.uniform(0.0, h);
    g.apex_col = rng.bernoulli(0.3) ? std::floor(rng.uniform(0.0, w)) : rng.uniform(0.0, w);
    g.half_angle_deg = rng.uniform(1.0, 89.0);
    g.radius = rng.uniform(1.0, 1.5 * (h + w));
    const BinaryImage fast = sector_mask(g, h, w);
    const BinaryImage oracle = reference::sector_mask(g, h, w);
    REQUIRE(fast.count() == oracle.count());
    REQUIRE(fast == oracle);
  }
}

TEST_CASE("sector mask is deterministic for equal geometries") {
  const auto g = SectorGeometry::default_for(64, 64);
  CHECK(sector_mask(g, 64, 64) == sector_mask(SectorGeometry(g), 64, 64));
}

TEST_CASE("apply_default_sector zeroes exactly the outside pixels") {
  Rng rng(5);
  const Sequence s = random_sequence(rng, Dims{24, 20, 3});
  const Sequence out = apply_default_sector(s);
  const BinaryImage m = sector_mask(SectorGeometry::default_for(24, 20), 24, 20);
  for (std::uint32_t f = 0; f < 3; ++f)
    for (std::uint32_t r = 0; r < 24; ++r)
      for (std::uint32_t c = 0; c < 20; ++c) CHECK(out.at(f, r, c) == (m.at(r, c) ? s.at(f, r, c) : 0.0F));
}

TEST_CASE("phantom is a pure function of its arguments") {
  const auto cfg = PhantomConfig::default_for(64, 64);
  CHECK(generate_phantom(cfg, 16, 11) == generate_phantom(cfg, 16, 11));
  CHECK_FALSE(generate_phantom(cfg, 16, 11) == generate_phantom(cfg, 16, 12));
  PhantomConfig other = cfg;
  other.speckle_seed = 2;
  CHECK_FALSE(generate_phantom(cfg, 16, 11) == generate_phantom(other, 16, 11));
}

TEST_CASE("phantom pixels outside the sector are exactly zero") {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto h = static_cast<std::uint32_t>(16 * (1 + rng.below(6)));
    const auto w = static_cast<std::uint32_t>(16 * (1 + rng.below(6)));
    const auto cfg = PhantomConfig::default_for(h, w);
    const Sequence s = generate_phantom(cfg, 4, rng.next_u64());
    const BinaryImage m = sector_mask(cfg.geometry, h, w);
    for (std::uint32_t f = 0; f < 4; ++f)
      for (std::uint32_t r = 0; r < h; ++r)
        for (std::uint32_t c = 0; c < w; ++c)
          if (!m.at(r, c)) REQUIRE(std::bit_cast<std::uint32_t>(s.at(f, r, c)) == 0U);
  }
}

namespace {

// Mean distance of the generator's wall pixels from the ring center, per frame.
std::vector<double> wall_radius_per_frame(const PhantomConfig& cfg, std::uint32_t frames, std::uint64_t seed) {
  const auto labels = phantom_regions(cfg, frames, seed);
  const double cr = cfg.geometry.apex_row + cfg.ring_center_depth * cfg.geometry.radius;
  const double cc = cfg.geometry.apex_col;
  std::vector<double> out;
  for (std::uint32_t f = 0; f < frames; ++f) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::uint32_t r = 0; r < cfg.height; ++r)
      for (std::uint32_t c = 0; c < cfg.width; ++c) {
        if (labels[(static_cast<std::size_t>(f) * cfg.height + r) * cfg.width + c] != PhantomRegion::Wall) continue;
        s += std::hypot(r + 0.5 - cr, c + 0.5 - cc);
        ++n;
      }
    out.push_back(s / static_cast<double>(n));
  }
  return out;
}

}  // namespace

TEST_CASE("zero contraction keeps the wall radius constant") {
  PhantomConfig cfg = PhantomConfig::default_for(64, 64);
  cfg.contraction_amplitude = 0.0;
  const auto radii = wall_radius_per_frame(cfg, 20, 4);
  const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
  CHECK(*hi - *lo <= 0.5);
  for (std::uint32_t f = 0; f < 20; ++f) CHECK(phantom_wall_radius(cfg, f, 4) == phantom_wall_radius(cfg, 0, 4));

  cfg.contraction_amplitude = 0.2;
  const auto moving = wall_radius_per_frame(cfg, 20, 4);
  const auto [mlo, mhi] = std::minmax_element(moving.begin(), moving.end());
  CHECK(*mhi - *mlo > 1.0);
}

TEST_CASE("wall radius is periodic with the cycle length") {
  const auto cfg = PhantomConfig::default_for(64, 64);
  for (std::uint32_t f = 0; f < 16; ++f) {
    CHECK(phantom_wall_radius(cfg, f, 9) == doctest::Approx(phantom_wall_radius(cfg, f + cfg.cycle_frames, 9)));
  }
}

TEST_CASE("wall is brighter than the cavity in every frame") {
  for (std::uint64_t seed : {1ULL, 2ULL, 77ULL}) {
    const auto cfg = PhantomConfig::default_for(64, 64);
    const Sequence s = generate_phantom(cfg, 16, seed);
    const auto labels = phantom_regions(cfg, 16, seed);
    for (std::uint32_t f = 0; f < 16; ++f) {
      double wall = 0.0, cavity = 0.0;
      std::size_t nw = 0, nc = 0;
      for (std::size_t i = 0; i < cfg.height * cfg.width; ++i) {
        const std::size_t k = f * cfg.height * cfg.width + i;
        if (labels[k] == PhantomRegion::Wall) {
          wall += s.values()[k];
          ++nw;
        } else if (labels[k] == PhantomRegion::Cavity) {
          cavity += s.values()[k];
          ++nc;
        }
      }
      REQUIRE(nw > 0);
      REQUIRE(nc > 0);
      CHECK(wall / nw > cavity / nc);
    }
  }
}

TEST_CASE("phantom config validation") {
  PhantomConfig cfg = PhantomConfig::default_for(32, 32);
  CHECK_NOTHROW(cfg.validate());
  cfg.wall_brightness = cfg.cavity_brightness;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = PhantomConfig::default_for(32, 32);
  cfg.contraction_amplitude = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  CHECK_THROWS_AS(generate_phantom(PhantomConfig::default_for(32, 32), 0, 1), ParameterError);
}

TEST_CASE("manifest text round-trips, with comments and optional split column") {
  const std::string text =
      "# id\tclean\tcluttered\tmask\tpattern\toffset\tsplit\n"
      "a\tclean/a.stsq\tcluttered/a.stsq\tmask/a.stsq\t3\t0\tval\n"
      "\n"
      "b\tclean/b.stsq\tcluttered/b.stsq\tmask/b.stsq\t400\t5\n";
  const DatasetManifest m = parse_manifest(text, "/data");
  REQUIRE(m.records.size() == 2);
  CHECK(m.records[0].split == "val");
  CHECK(m.records[1].split == "train");
  CHECK(m.records[1].pattern_id == 400);
  CHECK(m.records[1].start_frame_offset == 5);
  CHECK(m.resolve("clean/a.stsq") == std::filesystem::path("/data/clean/a.stsq"));
  CHECK(m.split("val").size() == 1);
  CHECK(parse_manifest(format_manifest(m), "/data") == m);
}

TEST_CASE("manifest rejects malformed lines and duplicate ids") {
  CHECK_THROWS_AS(parse_manifest("a\tb\tc\n", "."), FormatError);
  CHECK_THROWS_AS(parse_manifest("a\tb\tc\td\tx\t0\n", "."), FormatError);
  CHECK_THROWS_AS(parse_manifest("a\tb\tc\td\t1\t0\na\tb\tc\td\t2\t0\n", "."), FormatError);
  DatasetManifest dup = parse_manifest("a\tb\tc\td\t1\t0\n", ".");
  dup.records.push_back(dup.records[0]);
  CHECK_THROWS_AS(dup.validate(false), FormatError);
}

TEST_CASE("manifest validation checks that a record's files agree in dims") {
  TempDir dir;
  encode_sequence(Sequence::zeros(Dims{4, 4, 2}), dir / "c.stsq");
  encode_sequence(Sequence::zeros(Dims{4, 4, 2}), dir / "x.stsq");
  encode_sequence(Sequence::zeros(Dims{4, 4, 3}), dir / "m.stsq");
  DatasetManifest ok = parse_manifest("r\tc.stsq\tx.stsq\tc.stsq\t0\t0\n", dir.path());
  CHECK_NOTHROW(ok.validate(true));
  DatasetManifest bad = parse_manifest("r\tc.stsq\tx.stsq\tm.stsq\t0\t0\n", dir.path());
  CHECK_THROWS_AS(bad.validate(true), DimensionError);
  write_manifest(ok, dir / "manifest.tsv");
  CHECK(read_manifest(dir / "manifest.tsv") == ok);
}

TEST_CASE("key-value config parsing, tracking and digest") {
  const KvConfig kv = KvConfig::parse("# comment\n a = 1.5 \nlist = 1, 2,3\nname = x\n");
  CHECK(kv.get_double("a", 0.0) == 1.5);
  CHECK(kv.get_doubles("list", {}) == std::vector<double>{1, 2, 3});
  CHECK(kv.get_int("missing", 7) == 7);
  CHECK(kv.unused_keys() == std::vector<std::string>{"name"});
  CHECK_THROWS_AS(KvConfig::parse("a = 1\na = 2\n"), FormatError);
  const KvConfig reordered = KvConfig::parse("name = x\nlist = 1, 2,3\na = 1.5\n");
  CHECK(kv.digest() == reordered.digest());
  CHECK(kv.digest().size() == 16);
  CHECK(kv.digest() != KvConfig::parse("a = 1.5\n").digest());
}

}  // TEST_SUITE
