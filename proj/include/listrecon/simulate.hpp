#pragma once

#include <cstdint>
#include <vector>

#include "listrecon/phantom.hpp"
#include "listrecon/projector.hpp"

namespace listrecon {

/// Acquisition simulation parameters.  The TOF discretisation and grid live
/// in the ProjectionContext passed alongside.
struct SimConfig {
  double target_counts = 1e5;
  double contamination_fraction = 0.20;
  double psf_fwhm = 4.0;  ///< [mm]
  std::uint64_t seed = 1;
};

/// Per-LOR attenuation factors exp(-integral of mu) for every pair in the
/// table, computed with the non-TOF row machinery.  Values in (0, 1].
std::vector<double> attenuation_factors(const Image2D& attenuation_map,
                                        const ProjectionContext& ctx,
                                        const LorTable& table);

/// A simulated acquisition and everything reconstruction needs to model it:
/// the shuffled event list, the flat contamination mean per enumerated bin,
/// and the activity-to-counts scale folded into the event multipliers.
struct SimResult {
  EventList events;
  double contamination_mean = 0.0;  ///< expected contamination counts per bin
  double scale = 0.0;               ///< counts per (activity * mm)
  double expected_total = 0.0;      ///< sum of all bin expectations
  std::size_t total_bins = 0;       ///< enumerated (LOR, TOF bin) count
};

/// Samples a list-mode acquisition:
///   lambda_i = scale * atten_i * (A_full blur(activity))_i + r
/// with r flat so that contamination is exactly cfg.contamination_fraction of
/// the total and scale so that sum(lambda) = cfg.target_counts; every bin's
/// count is drawn Poisson(lambda_i) and the resulting events are shuffled by
/// seed.  Event multipliers carry atten_i * scale, so reconstructions of the
/// event list land in activity units.  Throws EmptyDataError when the
/// expected projection is identically zero.
SimResult sample_listmode(const Phantom& phantom, const SimConfig& cfg,
                          const ProjectionContext& ctx, const LorTable& table);

}  // namespace listrecon
