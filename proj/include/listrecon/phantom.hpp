#pragma once

#include <cstdint>
#include <string>

#include "listrecon/image.hpp"
#include "listrecon/io.hpp"

namespace listrecon {

enum class PhantomKind { ellipse_brain, disks };

PhantomKind phantom_kind_from_string(const std::string& name);

/// Digital phantom: piecewise-constant activity, a matching attenuation map
/// (single water-equivalent tissue), and the ROI masks the metric suite
/// needs.  rois.a_true is the hot-lesion uptake, rois.b_true the drawn value
/// of the tissue the background ROIs sample.
struct Phantom {
  Image2D activity;
  Image2D attenuation;  ///< linear attenuation [1/mm]
  RoiSpec rois;
};

/// Builds a phantom on the given grid, deterministic per seed.
///
/// ellipse_brain: an outer cortex band drawn from N(96, 5^2) around an inner
/// core drawn from N(32, 5^2); hot lesions painted 144 in the cortex band,
/// cold lesions painted 48 in the core; lesion radii uniform in [2, 8] mm.
/// Background ROIs are 15 lesion-free disks in the cortex band.
///
/// disks: one uniform disk drawn from N(32, 5^2) with hot (144) and cold
/// (48) inserts and the same ROI layout on a ring.
Phantom make_phantom(PhantomKind kind, std::uint64_t seed,
                     const GridSpec& grid);

/// Gaussian blur, sigma = fwhm / 2.3548, separable, reflective boundary.
/// fwhm == 0 returns the image unchanged; negative fwhm is a config error.
/// The kernel is normalized, so the total sum is preserved.
Image2D psf_blur(const Image2D& img, double fwhm);

}  // namespace listrecon
