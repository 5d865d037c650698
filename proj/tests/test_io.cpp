#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "listrecon/config.hpp"
#include "listrecon/io.hpp"
#include "support/helpers.hpp"

using namespace listrecon;
using namespace testers;

namespace {

std::string slurp_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  REQUIRE(out.good());
}

}  // namespace

TEST_CASE("fnv1a64 reference vectors") {
  // Values from the published FNV-1a test suite.
  CHECK(fnv1a64(std::string("")) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64(std::string("a")) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64(std::string("foobar")) == 0x85944171f73967e8ull);
}

TEST_CASE("geometry hash separates any physics change") {
  SmallSetup s = small_setup(16);
  std::uint64_t base = geometry_hash(s.scanner, s.tof, s.grid);
  CHECK(base == geometry_hash(s.scanner, s.tof, s.grid));  // deterministic

  auto differs = [&](const ScannerGeometry& g, const TofSpec& t,
                     const GridSpec& gr) {
    return geometry_hash(g, t, gr) != base;
  };

  ScannerGeometry g2 = s.scanner;
  g2.n_modules += 1;
  CHECK(differs(g2, s.tof, s.grid));
  g2 = s.scanner;
  g2.ring_radius += 0.25;
  CHECK(differs(g2, s.tof, s.grid));

  TofSpec t2 = s.tof;
  t2.n_bins += 2;
  CHECK(differs(s.scanner, t2, s.grid));
  t2 = s.tof;
  t2.bin_width *= 1.01;
  CHECK(differs(s.scanner, t2, s.grid));
  t2 = s.tof;
  t2.fwhm_ps += 1.0;
  CHECK(differs(s.scanner, t2, s.grid));

  GridSpec gr2 = s.grid;
  gr2.width += 1;
  CHECK(differs(s.scanner, s.tof, gr2));
  gr2 = s.grid;
  gr2.spacing *= 2.0;
  CHECK(differs(s.scanner, s.tof, gr2));
}

TEST_CASE("event file round trip") {
  std::string dir = scratch_dir("io_lmev");
  std::string path = dir + "/events.lmev";
  SmallSetup s = small_setup(8);
  EventList events = random_events(s, 257, 7u);
  std::uint64_t h = geometry_hash(s.scanner, s.tof, s.grid);

  write_lmev(path, events, h, static_cast<std::uint16_t>(s.tof.n_bins));
  LmevData data = read_lmev(path);

  CHECK(data.version == 1);
  CHECK(data.geom_hash == h);
  CHECK(data.n_bins == s.tof.n_bins);
  REQUIRE(data.events.size() == events.size());
  for (std::size_t t = 0; t < events.size(); ++t) {
    CHECK(data.events[t].det_a == events[t].det_a);
    CHECK(data.events[t].det_b == events[t].det_b);
    CHECK(data.events[t].tof_bin == events[t].tof_bin);
    CHECK(data.events[t].multiplier == events[t].multiplier);  // exact f32
  }

  SUBCASE("empty list round-trips too") {
    write_lmev(path, {}, h, 3);
    LmevData empty = read_lmev(path);
    CHECK(empty.events.empty());
    CHECK(empty.n_bins == 3);
  }
}

TEST_CASE("event file rejects malformed input") {
  std::string dir = scratch_dir("io_lmev_bad");
  std::string path = dir + "/bad.lmev";
  SmallSetup s = small_setup(8);
  EventList events = random_events(s, 10, 8u);
  std::uint64_t h = geometry_hash(s.scanner, s.tof, s.grid);
  write_lmev(path, events, h, static_cast<std::uint16_t>(s.tof.n_bins));
  std::string good = slurp_bytes(path);

  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(read_lmev(dir + "/nonexistent.lmev"),
                         doctest::Contains("cannot open"), IoError);
  }
  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    spit_bytes(path, bad);
    CHECK_THROWS_WITH_AS(read_lmev(path), doctest::Contains("bad magic"),
                         IoError);
  }
  SUBCASE("unsupported version") {
    std::string bad = good;
    bad[4] = 9;
    spit_bytes(path, bad);
    CHECK_THROWS_WITH_AS(read_lmev(path), doctest::Contains("version"),
                         IoError);
  }
  SUBCASE("truncated header") {
    spit_bytes(path, good.substr(0, 9));
    CHECK_THROWS_AS(read_lmev(path), IoError);
  }
  SUBCASE("truncated record section") {
    spit_bytes(path, good.substr(0, good.size() - 3));
    CHECK_THROWS_WITH_AS(read_lmev(path), doctest::Contains("wrong size"),
                         IoError);
  }
  SUBCASE("TOF bin beyond the recorded bin count") {
    std::string bad = good;
    // Record layout: 10 bytes per event, tof_bin at offset +4 in the record.
    std::size_t rec0 = 26;
    bad[rec0 + 4] = static_cast<char>(s.tof.n_bins);
    bad[rec0 + 5] = 0;
    spit_bytes(path, bad);
    CHECK_THROWS_WITH_AS(read_lmev(path), doctest::Contains("out of range"),
                         IoError);
  }
  SUBCASE("negative multiplier") {
    EventList neg = events;
    neg[0].multiplier = -0.5f;
    write_lmev(path, neg, h, static_cast<std::uint16_t>(s.tof.n_bins));
    CHECK_THROWS_WITH_AS(read_lmev(path), doctest::Contains("multiplier"),
                         IoError);
  }
}

TEST_CASE("image file round trip") {
  std::string dir = scratch_dir("io_img");
  std::string path = dir + "/img.img2";
  GridSpec grid{7, 5, 1.75};
  Image2D img = random_image(grid, 11u, -2.0, 5.0);

  write_img(path, img);
  Image2D back = read_img(path);

  CHECK(back.width() == 7);
  CHECK(back.height() == 5);
  CHECK(back.grid().spacing == 1.75);
  for (std::size_t j = 0; j < img.size(); ++j)
    CHECK(back[j] == static_cast<double>(static_cast<float>(img[j])));

  SUBCASE("malformed images are rejected") {
    std::string good = slurp_bytes(path);
    std::string bad = good;
    bad[1] = 'X';
    spit_bytes(path, bad);
    CHECK_THROWS_WITH_AS(read_img(path), doctest::Contains("bad magic"),
                         IoError);
    spit_bytes(path, good.substr(0, good.size() - 1));
    CHECK_THROWS_WITH_AS(read_img(path), doctest::Contains("wrong size"),
                         IoError);
  }
}

TEST_CASE("pgm preview encodes a min-max scaled big-endian raster") {
  std::string dir = scratch_dir("io_pgm");
  std::string path = dir + "/img.pgm";
  Image2D img(GridSpec{2, 2, 1.0});
  img.at(0, 0) = 1.0;
  img.at(1, 0) = 3.0;
  img.at(0, 1) = 2.0;
  img.at(1, 1) = 1.0;
  write_pgm16(path, img);

  std::string bytes = slurp_bytes(path);
  std::string header = "P5\n2 2\n65535\n";
  REQUIRE(bytes.size() == header.size() + 8);
  CHECK(bytes.compare(0, header.size(), header) == 0);
  auto gray = [&](int k) {
    std::size_t off = header.size() + 2 * static_cast<std::size_t>(k);
    return (static_cast<unsigned>(static_cast<unsigned char>(bytes[off]))
            << 8) |
           static_cast<unsigned>(static_cast<unsigned char>(bytes[off + 1]));
  };
  CHECK(gray(0) == 0);       // min
  CHECK(gray(1) == 65535);   // max
  CHECK(gray(2) == 32768);   // halfway, rounded
  CHECK(gray(3) == 0);

  SUBCASE("constant image maps to zero") {
    Image2D flat(GridSpec{3, 1, 1.0}, 4.2);
    write_pgm16(path, flat);
    std::string b = slurp_bytes(path);
    for (std::size_t i = b.size() - 6; i < b.size(); ++i)
      CHECK(b[i] == '\0');
  }
}

TEST_CASE("roi file round trip") {
  std::string dir = scratch_dir("io_roi");
  std::string path = dir + "/rois.json";
  RoiSpec rois;
  rois.targets = {{1, 2, 3}, {10, 11}};
  rois.background = {{4, 5}, {6}, {7, 8, 9}};
  rois.a_true = 4.0;
  rois.b_true = 1.0;

  write_rois(path, rois);
  RoiSpec back = read_rois(path);
  CHECK(back.targets == rois.targets);
  CHECK(back.background == rois.background);
  CHECK(back.a_true == 4.0);
  CHECK(back.b_true == 1.0);

  SUBCASE("malformed JSON is wrapped in an IO error") {
    spit_bytes(path, "{ not json");
    CHECK_THROWS_AS(read_rois(path), IoError);
  }
  SUBCASE("missing fields are wrapped in an IO error") {
    spit_bytes(path, "{\"targets\": []}");
    CHECK_THROWS_AS(read_rois(path), IoError);
  }
}

TEST_CASE("csv writer") {
  CsvWriter csv({"alpha", "beta", "gamma"});
  csv.row({"1", "2.5", "x"});
  csv.row({"4", "5", "y"});
  CHECK(csv.text() == "alpha,beta,gamma\n1,2.5,x\n4,5,y\n");
  CHECK_THROWS_AS(csv.row({"too", "short"}), DimensionError);

  std::string dir = scratch_dir("io_csv");
  csv.save(dir + "/t.csv");
  CHECK(slurp_bytes(dir + "/t.csv") == csv.text());
}

TEST_CASE("run configuration parsing") {
  RunConfig cfg = RunConfig::parse(
      "# comment line\n"
      "\n"
      "  scanner.crystals = 224  \n"
      "tof.bins=9\n"
      "sim.counts = 1e5\n"
      "recon.beta = 0.25\n"
      "out.prefix = run_a\n");

  CHECK(cfg.has("tof.bins"));
  CHECK(!cfg.has("missing.key"));
  CHECK(cfg.get("out.prefix") == "run_a");
  CHECK(cfg.get_or("missing.key", "fallback") == "fallback");
  CHECK(cfg.get_int("scanner.crystals") == 224);
  CHECK(cfg.get_int("sim.counts") == 100000);  // scientific counts accepted
  CHECK(cfg.get_double("recon.beta") == 0.25);
  CHECK(cfg.get_int_or("tof.bins", 1) == 9);
  CHECK(cfg.get_u64_or("seed", 42u) == 42u);

  SUBCASE("missing required key names the key") {
    CHECK_THROWS_WITH_AS(cfg.get("phantom.kind"),
                         doctest::Contains("phantom.kind"),
                         InvalidConfigError);
  }
  SUBCASE("non-numeric values name the key") {
    CHECK_THROWS_WITH_AS(cfg.get_double("out.prefix"),
                         doctest::Contains("out.prefix"), InvalidConfigError);
    CHECK_THROWS_WITH_AS(cfg.get_int("recon.beta"),
                         doctest::Contains("recon.beta"), InvalidConfigError);
  }
  SUBCASE("malformed lines are rejected with their line number") {
    CHECK_THROWS_WITH_AS(RunConfig::parse("a = 1\nnot a pair\n"),
                         doctest::Contains("line 2"), InvalidConfigError);
    CHECK_THROWS_AS(RunConfig::parse("= 3\n"), InvalidConfigError);
  }
  SUBCASE("canonical text round-trips") {
    RunConfig again = RunConfig::parse(cfg.to_text());
    CHECK(again.to_text() == cfg.to_text());
    CHECK(again.entries() == cfg.entries());
  }
  SUBCASE("set overrides") {
    cfg.set("tof.bins", "11");
    CHECK(cfg.get_int("tof.bins") == 11);
  }
  SUBCASE("load from disk") {
    std::string dir = scratch_dir("io_cfg");
    write_text_file(dir + "/run.cfg", cfg.to_text());
    RunConfig loaded = RunConfig::load(dir + "/run.cfg");
    CHECK(loaded.entries() == cfg.entries());
    CHECK_THROWS_AS(RunConfig::load(dir + "/absent.cfg"), IoError);
  }
}
