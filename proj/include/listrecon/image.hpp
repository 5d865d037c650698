#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "listrecon/errors.hpp"

namespace listrecon {

/// Pixel grid centred on the scanner axis.  Pixel (p, q) has its centre at
///   x = (p - (width-1)/2) * spacing,  y = (q - (height-1)/2) * spacing
/// and images are stored row-major: index = q * width + p.
struct GridSpec {
  int width = 0;         ///< pixels along x
  int height = 0;        ///< pixels along y
  double spacing = 1.0;  ///< pixel pitch [mm]

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  double x_of(int p) const { return (p - 0.5 * (width - 1)) * spacing; }
  double y_of(int q) const { return (q - 0.5 * (height - 1)) * spacing; }
  /// Distance from grid centre to the outer corner of the pixel footprint.
  double half_diagonal() const {
    double hx = 0.5 * width * spacing;
    double hy = 0.5 * height * spacing;
    return std::sqrt(hx * hx + hy * hy);
  }
  bool operator==(const GridSpec&) const = default;
};

/// Dense 2-D image in double precision.
class Image2D {
public:
  Image2D() = default;
  explicit Image2D(GridSpec grid, double fill = 0.0)
      : grid_(grid), values_(grid.pixel_count(), fill) {
    if (grid.width <= 0 || grid.height <= 0 || !(grid.spacing > 0.0))
      throw DimensionError("image grid must have positive extent and spacing");
  }

  const GridSpec& grid() const { return grid_; }
  int width() const { return grid_.width; }
  int height() const { return grid_.height; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t j) { return values_[j]; }
  double operator[](std::size_t j) const { return values_[j]; }
  double& at(int p, int q) {
    return values_[static_cast<std::size_t>(q) * grid_.width + p];
  }
  double at(int p, int q) const {
    return values_[static_cast<std::size_t>(q) * grid_.width + p];
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double sum() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s;
  }
  double max() const {
    double m = values_.empty() ? 0.0 : values_[0];
    for (double v : values_)
      if (v > m) m = v;
    return m;
  }

private:
  GridSpec grid_;
  std::vector<double> values_;
};

}  // namespace listrecon
