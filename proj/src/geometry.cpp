#include "listrecon/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace listrecon {

Point2 ScannerGeometry::crystal_position(int k) const {
  double theta = 2.0 * std::numbers::pi * k / crystal_count();
  return {ring_radius * std::cos(theta), ring_radius * std::sin(theta)};
}

ScannerGeometry build_scanner(int n_modules, int crystals_per_module,
                              double ring_radius, double crystal_width) {
  if (n_modules < 1 || crystals_per_module < 1)
    throw InvalidConfigError("scanner needs at least one module and crystal");
  if (!(ring_radius > 0.0) || !(crystal_width > 0.0))
    throw InvalidConfigError("ring radius and crystal width must be positive");
  ScannerGeometry geom{n_modules, crystals_per_module, ring_radius,
                       crystal_width};
  double arc_pitch =
      2.0 * std::numbers::pi * ring_radius / geom.crystal_count();
  if (crystal_width > arc_pitch * (1.0 + 1e-12))
    throw InvalidConfigError(
        "crystals do not fit on the ring: width " +
        std::to_string(crystal_width) + " mm exceeds arc pitch " +
        std::to_string(arc_pitch) + " mm");
  return geom;
}

Lor lor_of(const ScannerGeometry& geom, int det_a, int det_b) {
  int n = geom.crystal_count();
  if (det_a < 0 || det_a >= n || det_b < 0 || det_b >= n)
    throw DimensionError("detector index out of range");
  if (det_a == det_b)
    throw DimensionError("degenerate LOR: identical detectors");
  Lor lor;
  lor.a = geom.crystal_position(det_a);
  lor.b = geom.crystal_position(det_b);
  double dx = lor.b.x - lor.a.x;
  double dy = lor.b.y - lor.a.y;
  lor.length = std::sqrt(dx * dx + dy * dy);
  lor.dir = {dx / lor.length, dy / lor.length};
  return lor;
}

double tof_sigma_mm(double fwhm_ps) {
  constexpr double speed_of_light_mm_per_ps = 0.299792458;
  constexpr double fwhm_to_sigma = 2.3548200450309493;  // 2*sqrt(2*ln 2)
  return 0.5 * speed_of_light_mm_per_ps * fwhm_ps / fwhm_to_sigma;
}

TofSpec make_tof_spec(double fwhm_ps, int n_bins, double bin_width) {
  if (!(fwhm_ps > 0.0))
    throw InvalidConfigError("TOF resolution must be positive");
  if (n_bins < 1 || n_bins % 2 == 0)
    throw InvalidConfigError("TOF bin count must be odd and >= 1");
  if (!(bin_width > 0.0))
    throw InvalidConfigError("TOF bin width must be positive");
  return TofSpec{fwhm_ps, n_bins, bin_width, tof_sigma_mm(fwhm_ps)};
}

double tof_bin_center_s(const Lor& lor, const TofSpec& tof, int bin) {
  double centre_offset = (bin - 0.5 * (tof.n_bins - 1)) * tof.bin_width;
  return 0.5 * lor.length + centre_offset;
}

LorTable enumerate_fan_lors(const ScannerGeometry& geom, double min_angle_deg) {
  int n = geom.crystal_count();
  double step_deg = 360.0 / n;
  LorTable table;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      int d = j - i;
      int sep = d < n - d ? d : n - d;
      if (sep * step_deg >= min_angle_deg - 1e-9)
        table.pairs.emplace_back(static_cast<std::uint16_t>(i),
                                 static_cast<std::uint16_t>(j));
    }
  }
  return table;
}

}  // namespace listrecon
