#include "listrecon/metrics.hpp"

#include <cmath>
#include <limits>

namespace listrecon {

namespace {

double mask_mean(const Image2D& img, const std::vector<int>& mask,
                 const char* what) {
  if (mask.empty()) throw DimensionError(std::string(what) + " mask is empty");
  double acc = 0.0;
  for (int j : mask) {
    if (j < 0 || static_cast<std::size_t>(j) >= img.size())
      throw DimensionError(std::string(what) + " mask index out of bounds");
    acc += img[static_cast<std::size_t>(j)];
  }
  return acc / static_cast<double>(mask.size());
}

double union_mean(const Image2D& img,
                  const std::vector<std::vector<int>>& masks,
                  const char* what) {
  if (masks.empty()) throw DimensionError(std::string(what) + " has no masks");
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& mask : masks) {
    for (int j : mask) {
      if (j < 0 || static_cast<std::size_t>(j) >= img.size())
        throw DimensionError(std::string(what) + " mask index out of bounds");
      acc += img[static_cast<std::size_t>(j)];
    }
    n += mask.size();
  }
  if (n == 0) throw DimensionError(std::string(what) + " masks are empty");
  return acc / static_cast<double>(n);
}

}  // namespace

double psnr(const Image2D& recon, const Image2D& truth) {
  if (!(recon.grid() == truth.grid()))
    throw DimensionError("PSNR images differ in shape");
  double peak = truth.max();
  if (!(peak > 0.0)) throw NumericError("PSNR reference has no positive peak");
  double acc = 0.0;
  for (std::size_t j = 0; j < recon.size(); ++j) {
    double d = recon[j] - truth[j];
    acc += d * d;
  }
  double rmse = std::sqrt(acc / static_cast<double>(recon.size()));
  if (rmse == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(peak / rmse);
}

double ssim(const Image2D& a, const Image2D& b) {
  if (!(a.grid() == b.grid())) throw DimensionError("SSIM images differ in shape");
  double peak = a.max();
  if (!(peak > 0.0)) throw NumericError("SSIM reference image has no positive peak");
  double c1 = 0.01 * peak;
  double c2 = 0.03 * peak;
  double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    ma += a[j];
    mb += b[j];
  }
  ma /= n;
  mb /= n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double da = a[j] - ma, db = b[j] - mb;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  va /= n;
  vb /= n;
  cov /= n;
  return (2.0 * ma * mb + c1) * (2.0 * cov + c2) /
         ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

double crc(std::span<const Image2D> recons, const RoiSpec& rois) {
  if (recons.size() < 2)
    throw DimensionError("CRC needs at least two realizations");
  double true_contrast = rois.a_true / rois.b_true - 1.0;
  if (true_contrast == 0.0 || !std::isfinite(true_contrast))
    throw NumericError("CRC undefined: a_true equals b_true");
  double acc = 0.0;
  for (const Image2D& img : recons) {
    double a_bar = union_mean(img, rois.targets, "target");
    double b_bar = union_mean(img, rois.background, "background");
    if (b_bar == 0.0) throw NumericError("CRC background mean is zero");
    acc += (a_bar / b_bar - 1.0) / true_contrast;
  }
  return acc / static_cast<double>(recons.size());
}

double background_std(std::span<const Image2D> recons, const RoiSpec& rois) {
  std::size_t S = recons.size();
  if (S < 2) throw DimensionError("background STD needs >= 2 realizations");
  if (rois.background.empty())
    throw DimensionError("background STD needs background ROIs");
  double acc = 0.0;
  for (const auto& mask : rois.background) {
    double mean = 0.0;
    std::vector<double> means(S);
    for (std::size_t s = 0; s < S; ++s) {
      means[s] = mask_mean(recons[s], mask, "background");
      mean += means[s];
    }
    mean /= static_cast<double>(S);
    if (mean == 0.0) throw NumericError("background ROI mean is zero");
    double var = 0.0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= static_cast<double>(S - 1);
    acc += std::sqrt(var) / mean;
  }
  return acc / static_cast<double>(rois.background.size());
}

double bias(std::span<const Image2D> recons, const RoiSpec& rois,
            double truth_value) {
  if (recons.empty()) throw DimensionError("bias needs realizations");
  if (truth_value == 0.0) throw NumericError("bias undefined for zero truth");
  double acc = 0.0;
  for (const Image2D& img : recons)
    acc += union_mean(img, rois.targets, "target");
  double a_bar = acc / static_cast<double>(recons.size());
  return (a_bar - truth_value) / truth_value;
}

double cnr(const Image2D& recon, const std::vector<int>& roi,
           const std::vector<int>& background) {
  double m_roi = mask_mean(recon, roi, "CNR roi");
  double m_bg = mask_mean(recon, background, "CNR background");
  if (background.size() < 2)
    throw DimensionError("CNR background needs >= 2 pixels");
  double var = 0.0;
  for (int j : background) {
    double d = recon[static_cast<std::size_t>(j)] - m_bg;
    var += d * d;
  }
  var /= static_cast<double>(background.size() - 1);
  double sd = std::sqrt(var);
  if (sd == 0.0) throw NumericError("CNR background has zero variance");
  return (m_roi - m_bg) / sd;
}

}  // namespace listrecon
