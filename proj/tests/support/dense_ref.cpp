#include "support/dense_ref.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace testers {

using namespace listrecon;

DenseSystem materialize(const EventList& events, const ProjectionContext& ctx,
                        const LorTable& table,
                        std::span<const double> multipliers) {
  DenseSystem sys;
  sys.n_events = events.size();
  sys.n_pixels = ctx.grid.pixel_count();
  sys.a.assign(sys.n_events * sys.n_pixels, 0.0);
  for (std::size_t t = 0; t < events.size(); ++t) {
    SparseRow row = compute_row(ctx.scanner, ctx.grid, ctx.tof, events[t]);
    double m = static_cast<double>(events[t].multiplier);
    for (std::size_t k = 0; k < row.size(); ++k)
      sys.a[t * sys.n_pixels + row.indices[k]] = m * row.weights[k];
  }

  auto n_bins = static_cast<std::size_t>(ctx.tof.n_bins);
  sys.total_bins = table.pairs.size() * n_bins;
  sys.sens = Image2D(ctx.grid);
  for (std::size_t l = 0; l < table.pairs.size(); ++l)
    for (std::size_t b = 0; b < n_bins; ++b) {
      Event ev;
      ev.det_a = table.pairs[l].first;
      ev.det_b = table.pairs[l].second;
      ev.tof_bin = static_cast<std::uint16_t>(b);
      SparseRow row = compute_row(ctx.scanner, ctx.grid, ctx.tof, ev);
      double m = multipliers[l * n_bins + b];
      for (std::size_t k = 0; k < row.size(); ++k)
        sys.sens[static_cast<std::size_t>(row.indices[k])] +=
            m * row.weights[k];
    }
  return sys;
}

namespace {

// Per-algorithm TV weight scaling, restated from the production contract:
// beta times the mean positive sensitivity times a calibration constant
// (1/80 for the one-step-late EM denominator, 1/10 for the SPDHG dual ball).
double mean_positive(const Image2D& sens) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < sens.size(); ++j)
    if (sens[j] > 0.0) {
      acc += sens[j];
      ++n;
    }
  return n ? acc / static_cast<double>(n) : 0.0;
}

std::vector<std::vector<std::size_t>> subset_rows(std::size_t n_events,
                                                  int n_subsets) {
  std::vector<std::vector<std::size_t>> rows(
      static_cast<std::size_t>(n_subsets));
  for (std::size_t t = 0; t < n_events; ++t)
    rows[t % static_cast<std::size_t>(n_subsets)].push_back(t);
  return rows;
}

std::vector<double> dense_forward(const DenseSystem& sys,
                                  const std::vector<std::size_t>& rows,
                                  const Image2D& x) {
  std::vector<double> out(rows.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* r = &sys.a[rows[i] * sys.n_pixels];
    double acc = 0.0;
    for (std::size_t j = 0; j < sys.n_pixels; ++j) acc += r[j] * x[j];
    out[i] = acc;
  }
  return out;
}

Image2D dense_back(const DenseSystem& sys,
                   const std::vector<std::size_t>& rows,
                   const std::vector<double>& vals, const GridSpec& grid) {
  Image2D out(grid);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* r = &sys.a[rows[i] * sys.n_pixels];
    for (std::size_t j = 0; j < sys.n_pixels; ++j) out[j] += r[j] * vals[i];
  }
  return out;
}

/// Smoothed isotropic TV gradient, forward differences, reflective boundary:
/// d/df_j sum sqrt(dx^2 + dy^2 + delta^2).
Image2D dense_tv_grad(const Image2D& x, double delta) {
  const GridSpec& g = x.grid();
  Image2D out(g);
  for (int q = 0; q < g.height; ++q)
    for (int p = 0; p < g.width; ++p) {
      std::size_t j = static_cast<std::size_t>(q) * g.width + p;
      double dx = p + 1 < g.width ? x[j + 1] - x[j] : 0.0;
      double dy = q + 1 < g.height ? x[j + g.width] - x[j] : 0.0;
      double r = std::sqrt(dx * dx + dy * dy + delta * delta);
      out[j] += -(dx + dy) / r;
      if (p + 1 < g.width) out[j + 1] += dx / r;
      if (q + 1 < g.height) out[j + g.width] += dy / r;
    }
  return out;
}

}  // namespace

std::vector<Image2D> ref_em_family(const DenseSystem& sys, const Image2D& init,
                                   const ReconConfig& cfg, bool with_tv) {
  auto rows = subset_rows(sys.n_events, cfg.n_subsets);
  double s = cfg.contamination_mean;
  double n_sub = static_cast<double>(cfg.n_subsets);
  double weight =
      with_tv && cfg.beta > 0.0
          ? cfg.beta * (1.0 / 80.0) * mean_positive(sys.sens)
          : 0.0;
  std::mt19937_64 rng(cfg.seed);
  Image2D x = init;
  std::vector<Image2D> iterates;
  for (int it = 1; it <= cfg.n_iterations; ++it) {
    auto order = subset_order(cfg.n_subsets, rng);
    for (int m : order) {
      const auto& sub = rows[static_cast<std::size_t>(m)];
      if (sub.empty()) continue;
      Image2D tg(x.grid());
      if (weight > 0.0) {
        double mx = x.max();
        tg = dense_tv_grad(x, mx > 0.0 ? 1e-6 * mx : 1e-6);
      }
      std::vector<double> fwd = dense_forward(sys, sub, x);
      for (double& v : fwd) {
        double lambda = v + s;
        v = lambda > cfg.epsilon_floor ? 1.0 / lambda : 0.0;
      }
      Image2D back = dense_back(sys, sub, fwd, x.grid());
      for (std::size_t j = 0; j < x.size(); ++j) {
        if (!(sys.sens[j] > 0.0)) {
          x[j] = 0.0;
          continue;
        }
        double denom = sys.sens[j];
        if (weight > 0.0)
          denom = std::max(sys.sens[j] + weight * tg[j], 0.1 * sys.sens[j]);
        x[j] = x[j] * back[j] * n_sub / denom;
      }
    }
    iterates.push_back(x);
  }
  return iterates;
}

std::vector<Image2D> ref_spdhg(const DenseSystem& sys, const Image2D& init,
                               const ReconConfig& cfg, double beta) {
  auto rows = subset_rows(sys.n_events, cfg.n_subsets);
  double s = cfg.contamination_mean;
  double beta_eff =
      beta > 0.0 ? beta * (1.0 / 10.0) * mean_positive(sys.sens) : 0.0;

  std::vector<double> norms(sys.n_events, 0.0);
  double max_norm = 0.0;
  for (std::size_t t = 0; t < sys.n_events; ++t) {
    const double* r = &sys.a[t * sys.n_pixels];
    double acc = 0.0;
    for (std::size_t j = 0; j < sys.n_pixels; ++j) acc += r[j] * r[j];
    norms[t] = std::sqrt(acc);
    max_norm = std::max(max_norm, norms[t]);
  }
  double tau = cfg.rho / (cfg.gamma * cfg.n_subsets * max_norm);
  std::vector<double> sigma(sys.n_events, 0.0);
  for (std::size_t t = 0; t < sys.n_events; ++t)
    if (norms[t] > 0.0) sigma[t] = cfg.gamma * cfg.rho / norms[t];
  double sigma_tv = cfg.rho * cfg.rho / (tau * 8.0);

  std::vector<double> ones(sys.n_events, 1.0);
  std::vector<std::size_t> all(sys.n_events);
  for (std::size_t t = 0; t < sys.n_events; ++t) all[t] = t;
  Image2D corr = dense_back(sys, all, ones, init.grid());
  for (std::size_t j = 0; j < corr.size(); ++j) corr[j] = sys.sens[j] - corr[j];

  Image2D x = init;
  Image2D z = corr;
  Image2D zbar = corr;
  std::vector<double> y(sys.n_events, 0.0);
  std::size_t M = x.size();
  std::vector<double> w_tv(beta_eff > 0.0 ? 2 * M : 0, 0.0);

  std::mt19937_64 rng(cfg.seed);
  std::vector<Image2D> iterates;
  for (int it = 1; it <= cfg.n_iterations; ++it) {
    auto order = subset_order(cfg.n_subsets, rng);
    for (int m : order) {
      const auto& sub = rows[static_cast<std::size_t>(m)];
      if (sub.empty()) continue;
      for (std::size_t j = 0; j < M; ++j)
        x[j] = std::max(0.0, x[j] - tau * zbar[j]);
      std::vector<double> fwd = dense_forward(sys, sub, x);
      std::vector<double> delta(sub.size(), 0.0);
      for (std::size_t i = 0; i < sub.size(); ++i) {
        std::size_t t = sub[i];
        if (sigma[t] == 0.0) continue;
        double yhat = y[t] + sigma[t] * (fwd[i] + s);
        double ynew =
            0.5 * (1.0 + yhat -
                   std::sqrt((yhat - 1.0) * (yhat - 1.0) + 4.0 * sigma[t]));
        delta[i] = ynew - y[t];
        y[t] = ynew;
      }
      Image2D dz = dense_back(sys, sub, delta, x.grid());
      double extr = static_cast<double>(cfg.n_subsets);
      for (std::size_t j = 0; j < M; ++j) {
        z[j] += dz[j];
        zbar[j] = z[j] + extr * dz[j];
      }
    }
    if (beta_eff > 0.0) {
      for (std::size_t j = 0; j < M; ++j)
        x[j] = std::max(0.0, x[j] - tau * zbar[j]);
      const GridSpec& g = x.grid();
      std::vector<double> d(2 * M, 0.0);
      for (int q = 0; q < g.height; ++q)
        for (int p = 0; p < g.width; ++p) {
          std::size_t j = static_cast<std::size_t>(q) * g.width + p;
          if (p + 1 < g.width) d[j] = x[j + 1] - x[j];
          if (q + 1 < g.height) d[M + j] = x[j + g.width] - x[j];
        }
      for (std::size_t j = 0; j < M; ++j) {
        double wx = w_tv[j] + sigma_tv * d[j];
        double wy = w_tv[M + j] + sigma_tv * d[M + j];
        double norm = std::sqrt(wx * wx + wy * wy);
        if (norm > beta_eff) {
          wx *= beta_eff / norm;
          wy *= beta_eff / norm;
        }
        d[j] = wx - w_tv[j];
        d[M + j] = wy - w_tv[M + j];
        w_tv[j] = wx;
        w_tv[M + j] = wy;
      }
      Image2D div(g);
      for (int q = 0; q < g.height; ++q)
        for (int p = 0; p < g.width; ++p) {
          std::size_t j = static_cast<std::size_t>(q) * g.width + p;
          if (p + 1 < g.width) {
            div[j] -= d[j];
            div[j + 1] += d[j];
          }
          if (q + 1 < g.height) {
            div[j] -= d[M + j];
            div[j + g.width] += d[M + j];
          }
        }
      for (std::size_t j = 0; j < M; ++j) {
        z[j] += div[j];
        zbar[j] = z[j] + div[j];
      }
    }
    iterates.push_back(x);
  }
  return iterates;
}

}  // namespace testers
