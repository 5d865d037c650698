#pragma once

#include <span>
#include <vector>

#include "listrecon/image.hpp"
#include "listrecon/io.hpp"

namespace listrecon {

/// Peak signal-to-noise ratio in dB: 20*log10(max(truth) / rmse(recon,
/// truth)).  Identical images return +infinity.
double psnr(const Image2D& recon, const Image2D& truth);

/// Global (whole-image, unwindowed) structural similarity with stabilizers
/// C1 = 0.01*max(a) and C2 = 0.03*max(a).  Population (1/n) moments.
double ssim(const Image2D& a, const Image2D& b);

/// Contrast recovery coefficient over S realizations:
/// mean_s[(target_mean_s / background_mean_s - 1) / (a_true/b_true - 1)],
/// with target/background means taken over the unions of the ROI masks.
double crc(std::span<const Image2D> recons, const RoiSpec& rois);

/// Background variability: mean over background ROIs of the across-
/// realization sample standard deviation of the ROI mean, divided by the
/// across-realization mean of that ROI mean.
double background_std(std::span<const Image2D> recons, const RoiSpec& rois);

/// Relative bias of the across-realization mean of the target-region mean
/// versus the ground-truth value: (A_bar - b_value) / b_value.
double bias(std::span<const Image2D> recons, const RoiSpec& rois,
            double truth_value);

/// Contrast-to-noise ratio (mean_roi - mean_bg) / std_bg with the sample
/// (n-1) standard deviation over background pixels.
double cnr(const Image2D& recon, const std::vector<int>& roi,
           const std::vector<int>& background);

}  // namespace listrecon
