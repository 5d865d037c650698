#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <set>

#include "listrecon/simulate.hpp"
#include "support/helpers.hpp"

using namespace listrecon;
using namespace testers;

TEST_CASE("phantoms are bit-identical per seed") {
  GridSpec grid{32, 32, 2.0};
  for (PhantomKind kind : {PhantomKind::ellipse_brain, PhantomKind::disks}) {
    Phantom a = make_phantom(kind, 7u, grid);
    Phantom b = make_phantom(kind, 7u, grid);
    CHECK(a.activity.values() == b.activity.values());
    CHECK(a.attenuation.values() == b.attenuation.values());
    CHECK(a.rois.targets == b.rois.targets);
    CHECK(a.rois.background == b.rois.background);
    CHECK(a.rois.b_true == b.rois.b_true);

    Phantom c = make_phantom(kind, 8u, grid);
    CHECK(a.activity.values() != c.activity.values());
  }
}

TEST_CASE("phantom kind names") {
  CHECK(phantom_kind_from_string("ellipse-brain") ==
        PhantomKind::ellipse_brain);
  CHECK(phantom_kind_from_string("ellipse_brain") ==
        PhantomKind::ellipse_brain);
  CHECK(phantom_kind_from_string("disks") == PhantomKind::disks);
  CHECK_THROWS_AS(phantom_kind_from_string("sphere"), InvalidConfigError);
}

TEST_CASE("phantom content on a full-size grid") {
  GridSpec grid{64, 64, 2.0};
  Phantom ph = make_phantom(PhantomKind::ellipse_brain, 3u, grid);

  CHECK(ph.rois.a_true == 144.0);
  CHECK(ph.rois.targets.size() == 4);  // hot lesion count at this width
  CHECK(!ph.rois.background.empty());
  CHECK(ph.rois.background.size() <= 15);

  // Hot lesions are painted exactly at the lesion uptake.
  for (const auto& mask : ph.rois.targets) {
    REQUIRE(!mask.empty());
    for (int j : mask)
      CHECK(ph.activity[static_cast<std::size_t>(j)] == 144.0);
  }
  // Background ROIs sample undisturbed cortex at the drawn value.
  for (const auto& mask : ph.rois.background) {
    REQUIRE(!mask.empty());
    for (int j : mask)
      CHECK(ph.activity[static_cast<std::size_t>(j)] == ph.rois.b_true);
  }
  // Attenuation is water-equivalent tissue inside, zero outside, and the
  // supports agree.
  for (std::size_t j = 0; j < ph.activity.size(); ++j) {
    bool inside = ph.attenuation[j] > 0.0;
    if (inside) CHECK(ph.attenuation[j] == 0.0096);
    CHECK((ph.activity[j] > 0.0) == inside);
  }
  CHECK(ph.activity.max() == 144.0);

  Phantom disks = make_phantom(PhantomKind::disks, 3u, grid);
  CHECK(disks.rois.a_true == 144.0);
  CHECK(disks.rois.targets.size() == 2);
  std::set<double> levels(disks.activity.values().begin(),
                          disks.activity.values().end());
  // Flat disk value, cold insert, hot inserts and empty surround only.
  CHECK(levels.size() == 4);
  CHECK(levels.count(0.0) == 1);
  CHECK(levels.count(48.0) == 1);
  CHECK(levels.count(144.0) == 1);
  CHECK(levels.count(disks.rois.b_true) == 1);
}

TEST_CASE("cortex uptake draws centre on the nominal tissue mean") {
  GridSpec grid{16, 16, 2.0};
  double acc = 0.0;
  const int n = 1000;
  for (int seed = 0; seed < n; ++seed) {
    Phantom ph =
        make_phantom(PhantomKind::ellipse_brain, static_cast<std::uint64_t>(seed),
                     grid);
    acc += ph.rois.b_true;
  }
  double mean = acc / n;
  CHECK(mean > 95.5);
  CHECK(mean < 96.5);
}

TEST_CASE("psf blur") {
  SUBCASE("zero width is the identity") {
    Image2D img = random_image(GridSpec{9, 7, 1.0}, 3u);
    Image2D out = psf_blur(img, 0.0);
    CHECK(out.values() == img.values());
  }
  SUBCASE("negative width is rejected") {
    Image2D img(GridSpec{4, 4, 1.0}, 1.0);
    CHECK_THROWS_AS(psf_blur(img, -1.0), InvalidConfigError);
  }
  SUBCASE("total activity is preserved") {
    Image2D img = random_image(GridSpec{21, 17, 2.0}, 5u, 0.0, 10.0);
    Image2D out = psf_blur(img, 6.0);
    CHECK(out.sum() == doctest::Approx(img.sum()).epsilon(1e-12));
  }
  SUBCASE("impulse response is a separable centred gaussian") {
    GridSpec grid{33, 33, 1.0};
    Image2D img(grid);
    img.at(16, 16) = 1.0;
    double fwhm = 4.0;
    Image2D out = psf_blur(img, fwhm);
    double sigma_px = fwhm / 2.3548200450309493;

    CHECK(out.sum() == doctest::Approx(1.0).epsilon(1e-12));
    // Symmetric in all four directions.
    for (int d = 1; d <= 6; ++d) {
      CHECK(out.at(16 + d, 16) ==
            doctest::Approx(out.at(16 - d, 16)).epsilon(1e-12));
      CHECK(out.at(16, 16 + d) ==
            doctest::Approx(out.at(16, 16 - d)).epsilon(1e-12));
      CHECK(out.at(16 + d, 16) ==
            doctest::Approx(out.at(16, 16 + d)).epsilon(1e-12));
    }
    // Neighbour ratio matches the discrete gaussian.
    double expect = std::exp(-0.5 / (sigma_px * sigma_px));
    CHECK(out.at(17, 16) / out.at(16, 16) ==
          doctest::Approx(expect).epsilon(1e-12));
    // Peak at the impulse.
    CHECK(out.max() == out.at(16, 16));
  }
}

TEST_CASE("attenuation factors") {
  SmallSetup s = small_setup(16);
  LorTable table = enumerate_fan_lors(s.scanner);

  SUBCASE("zero attenuation gives unity factors") {
    Image2D mu(s.grid, 0.0);
    for (double f : attenuation_factors(mu, s.ctx(1), table))
      CHECK(f == 1.0);
  }
  SUBCASE("grid mismatch is rejected") {
    Image2D mu(GridSpec{4, 4, 1.0});
    CHECK_THROWS_AS(attenuation_factors(mu, s.ctx(1), table), DimensionError);
  }
  SUBCASE("uniform disk against the analytic line integral") {
    // Fine grid, diametric LOR straight along the x axis through the disk
    // centre: the line integral is mu * 2R up to one-pixel discretisation.
    GridSpec grid{101, 101, 1.0};
    double ring = 2.0 * grid.half_diagonal() + 20.0;
    ScannerGeometry scanner = build_scanner(8, 4, ring, 2.0);
    double mu_val = 0.01, radius = 30.0;
    Image2D mu(grid, 0.0);
    for (int q = 0; q < grid.height; ++q)
      for (int p = 0; p < grid.width; ++p) {
        double x = grid.x_of(p), y = grid.y_of(q);
        if (x * x + y * y <= radius * radius) mu.at(p, q) = mu_val;
      }
    LorTable single;
    single.pairs.emplace_back(0, 16);  // crystal 0 at angle 0, 16 at pi
    ProjectionContext ctx{scanner, grid, s.tof, 1};
    double factor = attenuation_factors(mu, ctx, single)[0];
    double line = -std::log(factor);
    CHECK(std::abs(line - mu_val * 2.0 * radius) <=
          1.5 * mu_val * grid.spacing + 1e-12);
    CHECK(factor > 0.0);
    CHECK(factor < 1.0);
  }
}

namespace {

struct SimFixture {
  SmallSetup s = small_setup(16);
  LorTable table;
  Phantom phantom;

  SimFixture()
      : table(enumerate_fan_lors(s.scanner)),
        phantom(make_phantom(PhantomKind::disks, 5u, s.grid)) {}
};

}  // namespace

TEST_CASE("listmode sampling basics") {
  SimFixture fx;
  SimConfig cfg;
  cfg.target_counts = 5000;
  cfg.seed = 11;

  SimResult r = sample_listmode(fx.phantom, cfg, fx.s.ctx(1), fx.table);

  SUBCASE("derived quantities") {
    CHECK(r.total_bins == fx.table.pairs.size() *
                              static_cast<std::size_t>(fx.s.tof.n_bins));
    CHECK(r.expected_total == 5000.0);
    // The flat contamination is exactly the configured fraction of the total.
    double contamination_total =
        r.contamination_mean * static_cast<double>(r.total_bins);
    CHECK(contamination_total / cfg.target_counts ==
          doctest::Approx(0.20).epsilon(1e-12));
    CHECK(r.scale > 0.0);
  }

  SUBCASE("event fields are valid and multipliers carry scale") {
    std::set<std::pair<int, int>> allowed;
    for (auto [a, b] : fx.table.pairs) allowed.insert({a, b});
    for (const Event& ev : r.events) {
      CHECK(allowed.count({ev.det_a, ev.det_b}) == 1);
      CHECK(ev.tof_bin < fx.s.tof.n_bins);
      CHECK(ev.multiplier > 0.0f);
    }
  }

  SUBCASE("deterministic per seed, distinct across seeds") {
    SimResult again = sample_listmode(fx.phantom, cfg, fx.s.ctx(1), fx.table);
    REQUIRE(again.events.size() == r.events.size());
    bool same = true;
    for (std::size_t t = 0; t < r.events.size(); ++t)
      same = same && r.events[t].det_a == again.events[t].det_a &&
             r.events[t].det_b == again.events[t].det_b &&
             r.events[t].tof_bin == again.events[t].tof_bin &&
             r.events[t].multiplier == again.events[t].multiplier;
    CHECK(same);

    SimConfig other = cfg;
    other.seed = 12;
    SimResult diff = sample_listmode(fx.phantom, other, fx.s.ctx(1), fx.table);
    bool identical = diff.events.size() == r.events.size();
    if (identical)
      for (std::size_t t = 0; t < r.events.size(); ++t)
        identical = identical && r.events[t].det_a == diff.events[t].det_a &&
                    r.events[t].det_b == diff.events[t].det_b &&
                    r.events[t].tof_bin == diff.events[t].tof_bin;
    CHECK_FALSE(identical);
  }
}

TEST_CASE("realized counts concentrate on the target") {
  SimFixture fx;
  SimConfig cfg;
  cfg.target_counts = 1e4;
  double bound = 4.0 * std::sqrt(cfg.target_counts);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    cfg.seed = seed;
    SimResult r = sample_listmode(fx.phantom, cfg, fx.s.ctx(1), fx.table);
    double realized = static_cast<double>(r.events.size());
    CHECK(std::abs(realized - cfg.target_counts) <= bound);
  }
}

TEST_CASE("listmode sampling input validation") {
  SimFixture fx;
  SimConfig cfg;

  SUBCASE("target counts below one") {
    cfg.target_counts = 0.5;
    CHECK_THROWS_AS(sample_listmode(fx.phantom, cfg, fx.s.ctx(1), fx.table),
                    InvalidConfigError);
  }
  SUBCASE("contamination fraction out of range") {
    cfg.contamination_fraction = 1.0;
    CHECK_THROWS_AS(sample_listmode(fx.phantom, cfg, fx.s.ctx(1), fx.table),
                    InvalidConfigError);
    cfg.contamination_fraction = -0.1;
    CHECK_THROWS_AS(sample_listmode(fx.phantom, cfg, fx.s.ctx(1), fx.table),
                    InvalidConfigError);
  }
  SUBCASE("empty LOR table") {
    CHECK_THROWS_AS(sample_listmode(fx.phantom, cfg, fx.s.ctx(1), LorTable{}),
                    InvalidConfigError);
  }
  SUBCASE("zero activity") {
    Phantom dead = fx.phantom;
    for (std::size_t j = 0; j < dead.activity.size(); ++j)
      dead.activity[j] = 0.0;
    CHECK_THROWS_AS(sample_listmode(dead, cfg, fx.s.ctx(1), fx.table),
                    EmptyDataError);
  }
}

TEST_CASE("poisson draws match the stated expectations" *
          doctest::timeout(300)) {
  // Goodness of fit of the realized bin histogram against the exact per-bin
  // expectations at high count, chi^2 with one degree of freedom per bin.
  SimFixture fx;
  SimConfig cfg;
  cfg.target_counts = 1e7;
  cfg.seed = 2026;

  SimResult r = sample_listmode(fx.phantom, cfg, fx.s.ctx(1), fx.table);

  // Recompute the expectations exactly as the simulator defines them.
  Image2D blurred = psf_blur(fx.phantom.activity, cfg.psf_fwhm);
  std::vector<double> atten =
      attenuation_factors(fx.phantom.attenuation, fx.s.ctx(1), fx.table);
  std::size_t n_bins = static_cast<std::size_t>(fx.s.tof.n_bins);
  std::vector<double> mult(r.total_bins);
  for (std::size_t l = 0; l < fx.table.pairs.size(); ++l)
    for (std::size_t b = 0; b < n_bins; ++b) mult[l * n_bins + b] = atten[l];
  std::vector<double> raw =
      forward_project_full(blurred, fx.s.ctx(1), fx.table, mult);
  std::vector<double> lambda(r.total_bins);
  for (std::size_t i = 0; i < r.total_bins; ++i)
    lambda[i] = r.scale * raw[i] + r.contamination_mean;

  std::map<std::pair<int, int>, std::size_t> lor_index;
  for (std::size_t l = 0; l < fx.table.pairs.size(); ++l)
    lor_index[{fx.table.pairs[l].first, fx.table.pairs[l].second}] = l;
  std::vector<double> observed(r.total_bins, 0.0);
  for (const Event& ev : r.events) {
    std::size_t l = lor_index.at({ev.det_a, ev.det_b});
    observed[bin_index(l, fx.s.tof.n_bins, ev.tof_bin)] += 1.0;
  }

  double chi2 = 0.0;
  for (std::size_t i = 0; i < r.total_bins; ++i) {
    double d = observed[i] - lambda[i];
    chi2 += d * d / lambda[i];
  }
  // Wilson-Hilferty upper 1% quantile of chi^2 with df = bin count: the fit
  // must not be rejected at the 1% level.
  double df = static_cast<double>(r.total_bins);
  double z99 = 2.3263478740408408;
  double u = 2.0 / (9.0 * df);
  double crit = df * std::pow(1.0 - u + z99 * std::sqrt(u), 3.0);
  CHECK(chi2 < crit);
  // Guard against degenerate underdispersion as well (lower 0.0001% tail).
  double zlo = -4.75;
  double lo = df * std::pow(1.0 - u + zlo * std::sqrt(u), 3.0);
  CHECK(chi2 > lo);
}
