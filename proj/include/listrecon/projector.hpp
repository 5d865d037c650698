#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "listrecon/geometry.hpp"
#include "listrecon/image.hpp"

namespace listrecon {

/// One detected coincidence.  `multiplier` carries the per-bin scalar factors
/// (attenuation x normalization); the geometric row and the TOF kernel are
/// recomputed on the fly and never stored.
struct Event {
  std::uint16_t det_a = 0;
  std::uint16_t det_b = 0;
  std::uint16_t tof_bin = 0;
  float multiplier = 1.0f;
};

using EventList = std::vector<Event>;

/// Sparse system-matrix row: unique pixel indices with strictly positive
/// weights.  Support is bounded by 2*max(P, Q).
struct SparseRow {
  std::vector<int> indices;
  std::vector<double> weights;

  void clear() {
    indices.clear();
    weights.clear();
  }
  std::size_t size() const { return indices.size(); }
  void push(int j, double w) {
    indices.push_back(j);
    weights.push_back(w);
  }
};

/// Everything a projection needs besides the data: scanner, pixel grid, TOF
/// discretisation, and the worker count (0 = auto).
struct ProjectionContext {
  ScannerGeometry scanner;
  GridSpec grid;
  TofSpec tof;
  int threads = 0;
};

/// One Joseph step: the ray crosses the pixel-centre plane of a dominant-axis
/// column at arc length t and deposits onto the two straddling pixels.
struct ColumnSample {
  double t;      ///< arc length from lor.a at the plane crossing [mm]
  int j_lo;      ///< flat index of the lower straddling pixel, -1 if off-grid
  int j_hi;      ///< flat index of the upper straddling pixel, -1 if off-grid
  double w_lo;   ///< rho * step_length, 0 when degenerate
  double w_hi;   ///< (1 - rho) * step_length
};

/// Reusable scratch for a Joseph traversal of one LOR.
struct JosephWalk {
  std::vector<ColumnSample> cols;
  double step_length = 0.0;  ///< spacing / |dominant direction component|
};

/// Walks a LOR across the grid along its dominant axis: one sample per
/// dominant-axis column whose pixel-centre plane is crossed within the LOR
/// segment, in ascending column order.  Each sample splits the constant step
/// length between the two pixels straddling the crossing by linear
/// interpolation.  Off-grid or zero-weight sides are marked with index -1 /
/// weight 0.
void joseph_walk(const GridSpec& grid, const Lor& lor, JosephWalk& out);

/// TOF system-matrix row of one event: geometric Joseph weights modulated by
/// the Gaussian TOF weight evaluated at each step midpoint.  TOF weights
/// <= 1e-6 are dropped before the step-length multiply.  The event multiplier
/// is NOT folded in.  A LOR missing the grid yields an empty row.
void compute_row(const ScannerGeometry& geom, const GridSpec& grid,
                 const TofSpec& tof, const Event& ev, SparseRow& out,
                 JosephWalk& scratch);
SparseRow compute_row(const ScannerGeometry& geom, const GridSpec& grid,
                      const TofSpec& tof, const Event& ev);

/// Non-TOF Joseph row of a detector pair (every step weight kept).  Used for
/// line integrals through parameter maps, e.g. attenuation.
void compute_lor_row(const ScannerGeometry& geom, const GridSpec& grid,
                     int det_a, int det_b, SparseRow& out,
                     JosephWalk& scratch);

/// out[t] = multiplier_t * <row_t, img>.  Parallel over events; bit-exact
/// for any worker count.
std::vector<double> forward_project(const Image2D& img, const EventList& events,
                                    const ProjectionContext& ctx);

/// img_j = sum_t multiplier_t * row_t[j] * vals[t].  Exact adjoint of
/// forward_project.  Parallel over events with per-worker accumulator images
/// merged in worker order, so results are reproducible for a fixed worker
/// count and agree across counts to reduction roundoff.
Image2D back_project(std::span<const double> vals, const EventList& events,
                     const ProjectionContext& ctx);

/// Flat enumeration index of (lor_index, tof_bin): lor_index * n_bins + bin.
inline std::size_t bin_index(std::size_t lor_index, int n_bins, int bin) {
  return lor_index * static_cast<std::size_t>(n_bins) +
         static_cast<std::size_t>(bin);
}

/// s_j = sum_i m_i a_ij over every enumerated (LOR, TOF bin).  `multipliers`
/// holds one factor per enumerated bin in bin_index order.  Throws
/// InvalidConfigError for an empty LOR table and DimensionError on a
/// multiplier table of the wrong length.
Image2D sensitivity_image(const ProjectionContext& ctx, const LorTable& table,
                          std::span<const double> multipliers);

/// Expected value <m_i * row_i, img> for every enumerated (LOR, TOF bin), in
/// bin_index order.  Same row machinery as forward_project; feeds the
/// simulator.
std::vector<double> forward_project_full(const Image2D& img,
                                         const ProjectionContext& ctx,
                                         const LorTable& table,
                                         std::span<const double> multipliers);

/// L2 norm of each event's effective row (multiplier folded in), used for
/// per-event step sizes in primal-dual solvers.
std::vector<double> event_row_norms(const EventList& events,
                                    const ProjectionContext& ctx);

}  // namespace listrecon
