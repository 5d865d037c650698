#include "listrecon/tof_weights.hpp"

#include <cmath>
#include <numbers>

namespace listrecon {

double erf_approx(double x) {
  if (x == 0.0) return 0.0;
  constexpr double a = 0.14;
  double x2 = x * x;
  double num = 4.0 / std::numbers::pi + a * x2;
  double den = 1.0 + a * x2;
  double inner = 1.0 - std::exp(-x2 * num / den);
  double mag = std::sqrt(inner);
  return x > 0.0 ? mag : -mag;
}

double tof_weight(double d_tof, double omega_tof, double sigma_tof) {
  if (!(omega_tof > 0.0) || !(sigma_tof > 0.0))
    throw InvalidConfigError("TOF kernel needs positive bin width and sigma");
  constexpr double inv_sqrt2 = 0.7071067811865475;
  double scale = inv_sqrt2 / sigma_tof;
  double hi = erf_approx((d_tof + 0.5 * omega_tof) * scale);
  double lo = erf_approx((d_tof - 0.5 * omega_tof) * scale);
  double eps = 0.5 * (hi - lo);
  if (eps < 0.0) eps = 0.0;
  if (eps > 1.0) eps = 1.0;
  return eps;
}

}  // namespace listrecon
