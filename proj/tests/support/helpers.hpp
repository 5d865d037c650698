#pragma once

// Shared fixtures for the test suites: small scanner/grid/TOF setups sized so
// every suite runs in seconds, plus random-instance generators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "listrecon/geometry.hpp"
#include "listrecon/image.hpp"
#include "listrecon/projector.hpp"

namespace testers {

using namespace listrecon;

/// Scanner + grid + TOF bundle used by most suites.  The ring is kept well
/// outside the grid so every LOR endpoint is off-grid and every traversed
/// Joseph step lies fully inside the segment.
struct SmallSetup {
  ScannerGeometry scanner;
  GridSpec grid;
  TofSpec tof;

  ProjectionContext ctx(int threads = 1) const {
    return ProjectionContext{scanner, grid, tof, threads};
  }
};

inline SmallSetup small_setup(int grid_n = 16, double spacing = 2.0,
                              double fwhm_ps = 300.0, int n_bins = 5,
                              double bin_width = 0.0, int crystals = 32) {
  SmallSetup s;
  GridSpec g{grid_n, grid_n, spacing};
  double ring = 2.0 * g.half_diagonal() + 20.0;
  s.scanner = build_scanner(crystals / 4, 4, ring, 2.0);
  if (bin_width <= 0.0) bin_width = 2.0 * ring / n_bins + 1.0;
  s.tof = make_tof_spec(fwhm_ps, n_bins, bin_width);
  s.grid = g;
  return s;
}

/// Random events over detector pairs at least min_sep crystals apart, so the
/// LOR actually crosses the neighbourhood of the FOV.
inline EventList random_events(const SmallSetup& s, std::size_t n,
                               std::uint64_t seed,
                               bool random_multiplier = true) {
  std::mt19937_64 rng(seed);
  int K = s.scanner.crystal_count();
  std::uniform_int_distribution<int> det(0, K - 1);
  std::uniform_int_distribution<int> sep(K / 4, 3 * K / 4);
  std::uniform_int_distribution<int> bin(0, s.tof.n_bins - 1);
  std::uniform_real_distribution<double> mult(0.2, 1.0);
  EventList events;
  events.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    int a = det(rng);
    int b = (a + sep(rng)) % K;
    Event ev;
    ev.det_a = static_cast<std::uint16_t>(a);
    ev.det_b = static_cast<std::uint16_t>(b);
    ev.tof_bin = static_cast<std::uint16_t>(bin(rng));
    ev.multiplier = random_multiplier ? static_cast<float>(mult(rng)) : 1.0f;
    events.push_back(ev);
  }
  return events;
}

inline Image2D random_image(const GridSpec& grid, std::uint64_t seed,
                            double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> val(lo, hi);
  Image2D img(grid);
  for (std::size_t j = 0; j < img.size(); ++j) img[j] = val(rng);
  return img;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double rmse(const Image2D& a, const Image2D& b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double d = a[j] - b[j];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

inline double max_abs_diff(const Image2D& a, const Image2D& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j)
    m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

/// Fresh scratch directory under the system temp root, cleaned on entry.
inline std::string scratch_dir(const std::string& name) {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / ("listrecon_tests_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace testers
