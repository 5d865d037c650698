#pragma once

#include "listrecon/errors.hpp"

namespace listrecon {

/// Fast error-function approximation (max abs error well under 1e-3):
///   erf(x) ~ sign(x) * sqrt(1 - exp(-x^2 (4/pi + a x^2)/(1 + a x^2)))
/// with a = 0.14.  erf_approx(0) == 0 exactly.
double erf_approx(double x);

/// Gaussian TOF weight: probability mass of a normal with standard deviation
/// sigma_tof falling into a bin of width omega_tof whose centre lies at
/// signed distance d_tof from the distribution mean,
///   eps = 1/2 erf((d + w/2)/(sqrt(2) s)) - 1/2 erf((d - w/2)/(sqrt(2) s)).
/// Even in d_tof, in [0, 1].  Throws InvalidConfigError for non-positive
/// omega_tof or sigma_tof.
double tof_weight(double d_tof, double omega_tof, double sigma_tof);

}  // namespace listrecon
