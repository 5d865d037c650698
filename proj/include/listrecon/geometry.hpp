#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "listrecon/errors.hpp"

namespace listrecon {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Single-ring cylindrical scanner, reduced to its transaxial plane.
/// Crystals are numbered module-major and sit at equal angular spacing on a
/// circle of radius `ring_radius`; crystal k is centred at angle
/// 2*pi*k / crystal_count().
struct ScannerGeometry {
  int n_modules = 0;
  int crystals_per_module = 0;
  double ring_radius = 0.0;    ///< [mm]
  double crystal_width = 0.0;  ///< transaxial crystal pitch [mm]

  int crystal_count() const { return n_modules * crystals_per_module; }
  Point2 crystal_position(int k) const;
};

/// Validates and constructs a scanner.  Throws InvalidConfigError when any
/// count or length is non-positive, or when the crystals do not fit on the
/// ring (crystal_width greater than the arc pitch).
ScannerGeometry build_scanner(int n_modules, int crystals_per_module,
                              double ring_radius, double crystal_width);

/// Line of response between two crystal centres, with its unit direction and
/// length cached.  Arc length s along the LOR is measured from endpoint `a`.
struct Lor {
  Point2 a;
  Point2 b;
  Point2 dir;      ///< (b - a) / length
  double length;   ///< [mm]

  Point2 point_at(double s) const { return {a.x + dir.x * s, a.y + dir.y * s}; }
};

/// Builds the LOR for a detector pair.  Throws DimensionError when either
/// index is out of range or when det_a == det_b.
Lor lor_of(const ScannerGeometry& geom, int det_a, int det_b);

/// Time-of-flight discretisation and resolution along a LOR.  Bins are
/// centred on the LOR midpoint: bin i (0-based, n_bins odd) covers arc
/// lengths within bin_width/2 of
///   length/2 + (i - (n_bins-1)/2) * bin_width.
/// Positive offsets point from endpoint `a` towards `b`.
struct TofSpec {
  double fwhm_ps = 0.0;    ///< coincidence timing resolution, FWHM [ps]
  int n_bins = 1;
  double bin_width = 0.0;  ///< [mm] along the LOR
  double sigma = 0.0;      ///< spatial TOF sigma [mm], derived from fwhm_ps
};

/// Spatial TOF sigma in mm for a timing resolution given as FWHM in ps.
/// The factor 1/2 accounts for the two-photon difference measurement.
double tof_sigma_mm(double fwhm_ps);

/// Validates and constructs a TofSpec.  n_bins must be odd and >= 1;
/// fwhm_ps and bin_width must be positive.
TofSpec make_tof_spec(double fwhm_ps, int n_bins, double bin_width);

/// Arc length (from lor.a) of the centre of TOF bin i.
double tof_bin_center_s(const Lor& lor, const TofSpec& tof, int bin);

/// Unordered detector pairs making up an acquisition's LOR set.
struct LorTable {
  std::vector<std::pair<std::uint16_t, std::uint16_t>> pairs;
};

/// All detector pairs (i < j) whose angular separation on the ring is at
/// least `min_angle_deg`.  This keeps the fan of LORs that actually cross
/// the central field of view and drops grazing pairs.
LorTable enumerate_fan_lors(const ScannerGeometry& geom,
                            double min_angle_deg = 90.0);

}  // namespace listrecon
