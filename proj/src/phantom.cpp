#include "listrecon/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace listrecon {

namespace {

constexpr double kHotValue = 144.0;
constexpr double kColdValue = 48.0;
constexpr double kGmMean = 96.0, kWmMean = 32.0, kTissueStd = 5.0;
constexpr double kMuWater = 0.0096;  // 1/mm
constexpr int kBackgroundRois = 15;

struct Disk {
  double cx, cy, r;
};

bool overlaps(const Disk& a, const Disk& b) {
  double dx = a.cx - b.cx, dy = a.cy - b.cy;
  double rr = a.r + b.r;
  return dx * dx + dy * dy < rr * rr;
}

std::vector<int> disk_mask(const GridSpec& g, const Disk& d) {
  std::vector<int> mask;
  for (int q = 0; q < g.height; ++q) {
    double y = g.y_of(q) - d.cy;
    for (int p = 0; p < g.width; ++p) {
      double x = g.x_of(p) - d.cx;
      if (x * x + y * y <= d.r * d.r) mask.push_back(q * g.width + p);
    }
  }
  if (mask.empty()) {
    // Sub-pixel disk on a coarse grid: keep at least the nearest pixel so
    // ROI masks are never empty.
    int p = std::clamp(
        static_cast<int>(std::lround(d.cx / g.spacing + 0.5 * (g.width - 1))),
        0, g.width - 1);
    int q = std::clamp(
        static_cast<int>(std::lround(d.cy / g.spacing + 0.5 * (g.height - 1))),
        0, g.height - 1);
    mask.push_back(q * g.width + p);
  }
  return mask;
}

void paint(Image2D& img, const std::vector<int>& mask, double value) {
  for (int j : mask) img[static_cast<std::size_t>(j)] = value;
}

double ellipse_r2(double x, double y, double a, double b) {
  double u = x / a, v = y / b;
  return u * u + v * v;
}

}  // namespace

PhantomKind phantom_kind_from_string(const std::string& name) {
  if (name == "ellipse-brain" || name == "ellipse_brain")
    return PhantomKind::ellipse_brain;
  if (name == "disks") return PhantomKind::disks;
  throw InvalidConfigError("unknown phantom kind: " + name);
}

Phantom make_phantom(PhantomKind kind, std::uint64_t seed,
                     const GridSpec& grid) {
  Phantom ph;
  ph.activity = Image2D(grid, 0.0);
  ph.attenuation = Image2D(grid, 0.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gm_draw(kGmMean, kTissueStd);
  std::normal_distribution<double> wm_draw(kWmMean, kTissueStd);
  std::uniform_real_distribution<double> lesion_radius(2.0, 8.0);
  std::uniform_real_distribution<double> jitter(-0.12, 0.12);

  // Fixed draw order keeps phantoms bit-identical per seed.
  double gm = std::max(1.0, gm_draw(rng));
  double wm = std::max(1.0, wm_draw(rng));

  double hx = 0.5 * grid.width * grid.spacing;
  double hy = 0.5 * grid.height * grid.spacing;

  if (kind == PhantomKind::ellipse_brain) {
    double a_out = 0.80 * hx, b_out = 0.90 * hy;  // cortex outer boundary
    double core = 0.70;                           // core scale of the outline

    for (int q = 0; q < grid.height; ++q) {
      double y = grid.y_of(q);
      for (int p = 0; p < grid.width; ++p) {
        double x = grid.x_of(p);
        double r2 = ellipse_r2(x, y, a_out, b_out);
        if (r2 > 1.0) continue;
        bool inner = ellipse_r2(x, y, core * a_out, core * b_out) <= 1.0;
        ph.activity.at(p, q) = inner ? wm : gm;
        ph.attenuation.at(p, q) = kMuWater;
      }
    }

    // Hot lesions and background ROIs share a ring of slots mid-cortex.
    int n_hot = grid.width >= 96 ? 6 : (grid.width >= 48 ? 4 : 2);
    int slots = n_hot + kBackgroundRois;
    double band = 0.5 * (1.0 + core);  // mid-band ellipse scale
    std::vector<Disk> hot;
    std::vector<Disk> bg;
    for (int i = 0; i < slots; ++i) {
      double theta = 2.0 * std::numbers::pi * i / slots + jitter(rng);
      double r = lesion_radius(rng);  // drawn for every slot, used for hot
      Disk d{band * a_out * std::cos(theta), band * b_out * std::sin(theta),
             r};
      if (i < n_hot) {
        hot.push_back(d);
      } else {
        d.r = 4.0;
        bg.push_back(d);
      }
    }
    // Cold lesions sit in the core.
    std::vector<Disk> cold;
    for (int i = 0; i < 3; ++i) {
      double theta = 2.0 * std::numbers::pi * i / 3.0 + 0.5 + jitter(rng);
      cold.push_back(Disk{0.38 * core * a_out * std::cos(theta),
                          0.38 * core * b_out * std::sin(theta),
                          lesion_radius(rng)});
    }

    for (const Disk& d : hot) {
      auto mask = disk_mask(grid, d);
      paint(ph.activity, mask, kHotValue);
      ph.rois.targets.push_back(std::move(mask));
    }
    for (const Disk& d : cold) paint(ph.activity, disk_mask(grid, d), kColdValue);
    for (const Disk& d : bg) {
      bool clear = true;
      for (const Disk& h : hot) clear = clear && !overlaps(d, h);
      if (clear) ph.rois.background.push_back(disk_mask(grid, d));
    }
    ph.rois.a_true = kHotValue;
    ph.rois.b_true = gm;
  } else {
    double radius = 0.85 * std::min(hx, hy);
    for (int q = 0; q < grid.height; ++q) {
      double y = grid.y_of(q);
      for (int p = 0; p < grid.width; ++p) {
        double x = grid.x_of(p);
        if (x * x + y * y <= radius * radius) {
          ph.activity.at(p, q) = wm;
          ph.attenuation.at(p, q) = kMuWater;
        }
      }
    }
    std::vector<Disk> hot{{-0.45 * radius, 0.0, lesion_radius(rng)},
                          {0.45 * radius, 0.0, lesion_radius(rng)}};
    Disk cold{0.0, 0.45 * radius, lesion_radius(rng)};
    for (const Disk& d : hot) {
      auto mask = disk_mask(grid, d);
      paint(ph.activity, mask, kHotValue);
      ph.rois.targets.push_back(std::move(mask));
    }
    paint(ph.activity, disk_mask(grid, cold), kColdValue);
    for (int i = 0; i < kBackgroundRois; ++i) {
      double theta = 2.0 * std::numbers::pi * i / kBackgroundRois + 0.3;
      Disk d{0.62 * radius * std::cos(theta), 0.62 * radius * std::sin(theta),
             4.0};
      bool clear = !overlaps(d, cold);
      for (const Disk& h : hot) clear = clear && !overlaps(d, h);
      if (clear) ph.rois.background.push_back(disk_mask(grid, d));
    }
    ph.rois.a_true = kHotValue;
    ph.rois.b_true = wm;
  }
  return ph;
}

Image2D psf_blur(const Image2D& img, double fwhm) {
  if (fwhm < 0.0) throw InvalidConfigError("PSF FWHM must be >= 0");
  if (fwhm == 0.0) return img;
  const GridSpec& g = img.grid();
  double sigma = fwhm / 2.3548200450309493 / g.spacing;  // in pixels
  int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double w = std::exp(-0.5 * (i / sigma) * (i / sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    norm += w;
  }
  for (double& w : kernel) w /= norm;

  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };

  Image2D tmp(g), out(g);
  for (int q = 0; q < g.height; ++q)
    for (int p = 0; p < g.width; ++p) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               img.at(reflect(p + i, g.width), q);
      tmp.at(p, q) = acc;
    }
  for (int q = 0; q < g.height; ++q)
    for (int p = 0; p < g.width; ++p) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               tmp.at(p, reflect(q + i, g.height));
      out.at(p, q) = acc;
    }
  return out;
}

}  // namespace listrecon
