#include "listrecon/projector.hpp"

#include <cmath>
#include <cstdlib>

#include "listrecon/parallel.hpp"
#include "listrecon/tof_weights.hpp"

namespace listrecon {

namespace {

constexpr double kTofCutoff = 1e-6;

void check_event(const ScannerGeometry& geom, const TofSpec& tof,
                 const Event& ev) {
  if (ev.tof_bin >= tof.n_bins)
    throw DimensionError("event TOF bin out of range");
  if (ev.det_a >= geom.crystal_count() || ev.det_b >= geom.crystal_count())
    throw DimensionError("event detector index out of range");
}

}  // namespace

void joseph_walk(const GridSpec& grid, const Lor& lor, JosephWalk& out) {
  out.cols.clear();
  double h = grid.spacing;
  int P = grid.width;
  int Q = grid.height;
  bool x_dominant = std::abs(lor.dir.x) >= std::abs(lor.dir.y);

  // Along the dominant axis the ray advances one pixel pitch per step, so
  // every step contributes the same intersection length.
  double d_dom = x_dominant ? lor.dir.x : lor.dir.y;
  double d_oth = x_dominant ? lor.dir.y : lor.dir.x;
  double a_dom = x_dominant ? lor.a.x : lor.a.y;
  double a_oth = x_dominant ? lor.a.y : lor.a.x;
  int n_dom = x_dominant ? P : Q;
  int n_oth = x_dominant ? Q : P;
  out.step_length = h / std::abs(d_dom);
  double oth0 = x_dominant ? grid.y_of(0) : grid.x_of(0);

  for (int c = 0; c < n_dom; ++c) {
    double plane = x_dominant ? grid.x_of(c) : grid.y_of(c);
    double t = (plane - a_dom) / d_dom;
    if (t < 0.0 || t > lor.length) continue;
    double oth = a_oth + t * d_oth;
    double v = (oth - oth0) / h;  // fractional row coordinate
    double fl = std::floor(v);
    int r0 = static_cast<int>(fl);
    if (r0 < -1 || r0 > n_oth - 1) continue;
    double rho = 1.0 - (v - fl);  // share of the lower neighbour
    ColumnSample s;
    s.t = t;
    s.j_lo = -1;
    s.j_hi = -1;
    s.w_lo = 0.0;
    s.w_hi = 0.0;
    if (r0 >= 0 && rho > 0.0) {
      s.j_lo = x_dominant ? r0 * P + c : c * P + r0;
      s.w_lo = rho * out.step_length;
    }
    int r1 = r0 + 1;
    if (r1 <= n_oth - 1 && rho < 1.0) {
      s.j_hi = x_dominant ? r1 * P + c : c * P + r1;
      s.w_hi = (1.0 - rho) * out.step_length;
    }
    if (s.j_lo >= 0 || s.j_hi >= 0) out.cols.push_back(s);
  }
}

void compute_row(const ScannerGeometry& geom, const GridSpec& grid,
                 const TofSpec& tof, const Event& ev, SparseRow& out,
                 JosephWalk& scratch) {
  check_event(geom, tof, ev);
  out.clear();
  Lor lor = lor_of(geom, ev.det_a, ev.det_b);
  joseph_walk(grid, lor, scratch);
  if (scratch.cols.empty()) return;
  double s_center = tof_bin_center_s(lor, tof, ev.tof_bin);
  for (const ColumnSample& c : scratch.cols) {
    double eps = tof_weight(c.t - s_center, tof.bin_width, tof.sigma);
    if (eps <= kTofCutoff) continue;
    if (c.j_lo >= 0) out.push(c.j_lo, eps * c.w_lo);
    if (c.j_hi >= 0) out.push(c.j_hi, eps * c.w_hi);
  }
}

SparseRow compute_row(const ScannerGeometry& geom, const GridSpec& grid,
                      const TofSpec& tof, const Event& ev) {
  SparseRow row;
  JosephWalk walk;
  compute_row(geom, grid, tof, ev, row, walk);
  return row;
}

void compute_lor_row(const ScannerGeometry& geom, const GridSpec& grid,
                     int det_a, int det_b, SparseRow& out,
                     JosephWalk& scratch) {
  out.clear();
  Lor lor = lor_of(geom, det_a, det_b);
  joseph_walk(grid, lor, scratch);
  for (const ColumnSample& c : scratch.cols) {
    if (c.j_lo >= 0) out.push(c.j_lo, c.w_lo);
    if (c.j_hi >= 0) out.push(c.j_hi, c.w_hi);
  }
}

std::vector<double> forward_project(const Image2D& img, const EventList& events,
                                    const ProjectionContext& ctx) {
  if (!(img.grid() == ctx.grid))
    throw DimensionError("image grid does not match projection context");
  std::vector<double> out(events.size(), 0.0);
  int workers = resolve_threads(ctx.threads);
  const double* f = img.data();
  parallel_slices(events.size(), workers,
                  [&](int, std::size_t begin, std::size_t end) {
                    SparseRow row;
                    JosephWalk walk;
                    for (std::size_t t = begin; t < end; ++t) {
                      compute_row(ctx.scanner, ctx.grid, ctx.tof, events[t],
                                  row, walk);
                      double acc = 0.0;
                      for (std::size_t k = 0; k < row.size(); ++k)
                        acc += row.weights[k] * f[row.indices[k]];
                      out[t] = acc * static_cast<double>(events[t].multiplier);
                    }
                  });
  return out;
}

Image2D back_project(std::span<const double> vals, const EventList& events,
                     const ProjectionContext& ctx) {
  if (vals.size() != events.size())
    throw DimensionError("value vector length does not match event count");
  int workers = resolve_threads(ctx.threads);
  std::vector<Image2D> partial(static_cast<std::size_t>(workers),
                               Image2D(ctx.grid));
  parallel_slices(events.size(), workers,
                  [&](int w, std::size_t begin, std::size_t end) {
                    SparseRow row;
                    JosephWalk walk;
                    double* acc = partial[static_cast<std::size_t>(w)].data();
                    for (std::size_t t = begin; t < end; ++t) {
                      double v =
                          vals[t] * static_cast<double>(events[t].multiplier);
                      if (v == 0.0) continue;
                      compute_row(ctx.scanner, ctx.grid, ctx.tof, events[t],
                                  row, walk);
                      for (std::size_t k = 0; k < row.size(); ++k)
                        acc[row.indices[k]] += row.weights[k] * v;
                    }
                  });
  Image2D out = std::move(partial[0]);
  for (int w = 1; w < workers; ++w) {
    const double* src = partial[static_cast<std::size_t>(w)].data();
    double* dst = out.data();
    for (std::size_t j = 0; j < out.size(); ++j) dst[j] += src[j];
  }
  return out;
}

Image2D sensitivity_image(const ProjectionContext& ctx, const LorTable& table,
                          std::span<const double> multipliers) {
  if (table.pairs.empty())
    throw InvalidConfigError("sensitivity image needs a non-empty LOR table");
  std::size_t n_bins = static_cast<std::size_t>(ctx.tof.n_bins);
  if (multipliers.size() != table.pairs.size() * n_bins)
    throw DimensionError("multiplier table does not cover the enumeration");
  int workers = resolve_threads(ctx.threads);
  std::vector<Image2D> partial(static_cast<std::size_t>(workers),
                               Image2D(ctx.grid));
  parallel_slices(
      table.pairs.size(), workers,
      [&](int w, std::size_t begin, std::size_t end) {
        JosephWalk walk;
        double* acc = partial[static_cast<std::size_t>(w)].data();
        for (std::size_t l = begin; l < end; ++l) {
          auto [da, db] = table.pairs[l];
          Lor lor = lor_of(ctx.scanner, da, db);
          joseph_walk(ctx.grid, lor, walk);
          if (walk.cols.empty()) continue;
          for (int b = 0; b < ctx.tof.n_bins; ++b) {
            double m = multipliers[bin_index(l, ctx.tof.n_bins, b)];
            if (m == 0.0) continue;
            double s_center = tof_bin_center_s(lor, ctx.tof, b);
            for (const ColumnSample& c : walk.cols) {
              double eps =
                  tof_weight(c.t - s_center, ctx.tof.bin_width, ctx.tof.sigma);
              if (eps <= kTofCutoff) continue;
              double me = m * eps;
              if (c.j_lo >= 0) acc[c.j_lo] += me * c.w_lo;
              if (c.j_hi >= 0) acc[c.j_hi] += me * c.w_hi;
            }
          }
        }
      });
  Image2D out = std::move(partial[0]);
  for (int w = 1; w < workers; ++w) {
    const double* src = partial[static_cast<std::size_t>(w)].data();
    double* dst = out.data();
    for (std::size_t j = 0; j < out.size(); ++j) dst[j] += src[j];
  }
  return out;
}

std::vector<double> forward_project_full(const Image2D& img,
                                         const ProjectionContext& ctx,
                                         const LorTable& table,
                                         std::span<const double> multipliers) {
  if (!(img.grid() == ctx.grid))
    throw DimensionError("image grid does not match projection context");
  if (table.pairs.empty())
    throw InvalidConfigError("full projection needs a non-empty LOR table");
  std::size_t n_bins = static_cast<std::size_t>(ctx.tof.n_bins);
  if (multipliers.size() != table.pairs.size() * n_bins)
    throw DimensionError("multiplier table does not cover the enumeration");
  std::vector<double> out(table.pairs.size() * n_bins, 0.0);
  int workers = resolve_threads(ctx.threads);
  const double* f = img.data();
  parallel_slices(
      table.pairs.size(), workers,
      [&](int, std::size_t begin, std::size_t end) {
        JosephWalk walk;
        for (std::size_t l = begin; l < end; ++l) {
          auto [da, db] = table.pairs[l];
          Lor lor = lor_of(ctx.scanner, da, db);
          joseph_walk(ctx.grid, lor, walk);
          if (walk.cols.empty()) continue;
          for (int b = 0; b < ctx.tof.n_bins; ++b) {
            std::size_t i = bin_index(l, ctx.tof.n_bins, b);
            double m = multipliers[i];
            if (m == 0.0) continue;
            double s_center = tof_bin_center_s(lor, ctx.tof, b);
            double acc = 0.0;
            for (const ColumnSample& c : walk.cols) {
              double eps =
                  tof_weight(c.t - s_center, ctx.tof.bin_width, ctx.tof.sigma);
              if (eps <= kTofCutoff) continue;
              double pix = 0.0;
              if (c.j_lo >= 0) pix += c.w_lo * f[c.j_lo];
              if (c.j_hi >= 0) pix += c.w_hi * f[c.j_hi];
              acc += eps * pix;
            }
            out[i] = m * acc;
          }
        }
      });
  return out;
}

std::vector<double> event_row_norms(const EventList& events,
                                    const ProjectionContext& ctx) {
  std::vector<double> out(events.size(), 0.0);
  int workers = resolve_threads(ctx.threads);
  parallel_slices(events.size(), workers,
                  [&](int, std::size_t begin, std::size_t end) {
                    SparseRow row;
                    JosephWalk walk;
                    for (std::size_t t = begin; t < end; ++t) {
                      compute_row(ctx.scanner, ctx.grid, ctx.tof, events[t],
                                  row, walk);
                      double acc = 0.0;
                      for (double w : row.weights) acc += w * w;
                      out[t] = std::sqrt(acc) *
                               static_cast<double>(events[t].multiplier);
                    }
                  });
  return out;
}

}  // namespace listrecon
