#include "listrecon/recon.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace listrecon {

namespace {

void check_inputs(const EventList& events, const Image2D& init,
                  const ReconConfig& cfg, const ReconContext& rctx) {
  if (events.empty()) throw EmptyDataError("reconstruction needs events");
  if (!(init.grid() == rctx.proj.grid) || !(rctx.sens.grid() == rctx.proj.grid))
    throw DimensionError("image grids do not match projection context");
  if (cfg.n_iterations < 1 || cfg.n_subsets < 1)
    throw InvalidConfigError("iterations and subsets must be >= 1");
  if (cfg.beta < 0.0) throw InvalidConfigError("beta must be >= 0");
  if (!(cfg.gamma > 0.0)) throw InvalidConfigError("gamma must be > 0");
  if (!(cfg.rho > 0.0) || cfg.rho >= 1.0)
    throw InvalidConfigError("rho must be in (0, 1)");
  if (!(cfg.epsilon_floor > 0.0))
    throw InvalidConfigError("epsilon floor must be > 0");
}

/// Round-robin event partition: subset m holds events with t % n_subsets == m.
std::vector<EventList> partition_events(const EventList& events,
                                        int n_subsets) {
  std::vector<EventList> subsets(static_cast<std::size_t>(n_subsets));
  for (auto& s : subsets) s.reserve(events.size() / n_subsets + 1);
  for (std::size_t t = 0; t < events.size(); ++t)
    subsets[t % n_subsets].push_back(events[t]);
  bool warned = false;
  for (std::size_t m = 0; m < subsets.size(); ++m)
    if (subsets[m].empty() && !warned) {
      std::cerr << "warning: " << "subset " << m
                << " is empty and will be skipped\n";
      warned = true;
    }
  return subsets;
}

double safe_loglik(const Image2D& img, const EventList& events,
                   const ReconContext& rctx, double s) {
  std::vector<double> fwd = forward_project(img, events, rctx.proj);
  double acc = 0.0;
  for (double v : fwd) {
    double lambda = v + s;
    if (!(lambda > 0.0)) return -std::numeric_limits<double>::infinity();
    acc += std::log(lambda);
  }
  const double* f = img.data();
  const double* w = rctx.sens.data();
  double linear = 0.0;
  for (std::size_t j = 0; j < img.size(); ++j) linear += w[j] * f[j];
  return acc - linear - static_cast<double>(rctx.total_bins) * s;
}

/// Forward differences with reflective boundary (last row/column difference
/// is zero); out-of-place into caller buffers of size 2*M (dx then dy).
void grad_forward(const Image2D& img, std::vector<double>& d) {
  const GridSpec& g = img.grid();
  std::size_t M = img.size();
  d.assign(2 * M, 0.0);
  for (int q = 0; q < g.height; ++q)
    for (int p = 0; p < g.width; ++p) {
      std::size_t j = static_cast<std::size_t>(q) * g.width + p;
      if (p + 1 < g.width) d[j] = img[j + 1] - img[j];
      if (q + 1 < g.height) d[M + j] = img[j + g.width] - img[j];
    }
}

/// Adjoint of grad_forward: negative divergence.
void div_adjoint(const std::vector<double>& d, Image2D& out) {
  const GridSpec& g = out.grid();
  std::size_t M = out.size();
  for (std::size_t j = 0; j < M; ++j) out[j] = 0.0;
  for (int q = 0; q < g.height; ++q)
    for (int p = 0; p < g.width; ++p) {
      std::size_t j = static_cast<std::size_t>(q) * g.width + p;
      if (p + 1 < g.width) {
        out[j] -= d[j];
        out[j + 1] += d[j];
      }
      if (q + 1 < g.height) {
        out[j] -= d[M + j];
        out[j + g.width] += d[M + j];
      }
    }
}

/// One-step-late TV penalty folded into the EM denominator.  The weight is
/// beta scaled by the mean positive sensitivity so beta keeps its meaning
/// across count levels and unit choices; the clamp keeps the denominator
/// safely positive where the TV gradient pushes against the data term.
struct TvPenalty {
  double weight = 0.0;
  double floor = 0.1;  ///< lower bound on denom as a fraction of sens
};

/// One ordered-subset EM pass over the given subset order.  With a single
/// subset this is exactly one MLEM update; with a penalty each sub-update
/// divides by sens + weight * grad TV_delta(x) instead of sens (Green's
/// one-step-late scheme), evaluated at the current image.
void osem_pass(Image2D& x, const std::vector<EventList>& subsets,
               const std::vector<int>& order, const ReconConfig& cfg,
               const ReconContext& rctx, const TvPenalty* tv = nullptr) {
  double s = cfg.contamination_mean;
  double n_sub = static_cast<double>(subsets.size());
  Image2D tv_grad(x.grid());
  bool pen = tv && tv->weight > 0.0;
  for (int m : order) {
    const EventList& sub = subsets[static_cast<std::size_t>(m)];
    if (sub.empty()) continue;
    if (pen) {
      double mx = x.max();
      tv_grad = tv_grad_smooth(x, mx > 0.0 ? 1e-6 * mx : 1e-6);
    }
    std::vector<double> fwd = forward_project(x, sub, rctx.proj);
    for (double& v : fwd) {
      double lambda = v + s;
      // Events whose LOR misses the support contribute nothing; guard the
      // ratio so they cannot poison the update.
      v = lambda > cfg.epsilon_floor ? 1.0 / lambda : 0.0;
    }
    Image2D back = back_project(fwd, sub, rctx.proj);
    const double* sens = rctx.sens.data();
    const double* b = back.data();
    const double* tg = tv_grad.data();
    double* f = x.data();
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!(sens[j] > 0.0)) {
        f[j] = 0.0;
        continue;
      }
      double denom = sens[j];
      if (pen)
        denom = std::max(sens[j] + tv->weight * tg[j], tv->floor * sens[j]);
      f[j] = f[j] * b[j] * n_sub / denom;
    }
  }
}

double mean_positive_sens(const ReconContext& rctx) {
  double acc = 0.0;
  std::size_t n = 0;
  for (double v : rctx.sens.values())
    if (v > 0.0) {
      acc += v;
      ++n;
    }
  return n ? acc / static_cast<double>(n) : 0.0;
}

// The TV weights below are scaled by the mean positive sensitivity, which
// makes beta independent of the count level and of the activity units, and
// by a per-algorithm calibration constant that puts the published operating
// points (beta = 2.0 for EM-TV, 0.20 for SPDHG-TV) into the gentle
// regularization regime on the bundled phantoms.
constexpr double kEmtvWeightScale = 1.0 / 80.0;
constexpr double kSpdhgWeightScale = 1.0 / 10.0;

ReconResult run_em_family(const EventList& events, const Image2D& init,
                          const ReconConfig& cfg, const ReconContext& rctx,
                          const IterateCallback& on_iterate, bool with_tv) {
  check_inputs(events, init, cfg, rctx);
  auto subsets = partition_events(events, cfg.n_subsets);
  std::mt19937_64 rng(cfg.seed);
  TvPenalty tv;
  if (with_tv)
    tv.weight = effective_tv_weight(Algorithm::emtv, cfg.beta, rctx);
  ReconResult result;
  result.image = init;
  for (int it = 1; it <= cfg.n_iterations; ++it) {
    auto order = subset_order(cfg.n_subsets, rng);
    osem_pass(result.image, subsets, order, cfg, rctx,
              tv.weight > 0.0 ? &tv : nullptr);
    if (cfg.record_objective)
      result.objective.push_back(
          safe_loglik(result.image, events, rctx, cfg.contamination_mean));
    if (on_iterate) on_iterate(it, result.image);
  }
  return result;
}

ReconResult run_spdhg(const EventList& events, const Image2D& init,
                      const ReconConfig& cfg, const ReconContext& rctx,
                      const IterateCallback& on_iterate, double beta) {
  check_inputs(events, init, cfg, rctx);
  double s = cfg.contamination_mean;
  double beta_eff = effective_tv_weight(Algorithm::spdhgtv, beta, rctx);
  auto subsets = partition_events(events, cfg.n_subsets);
  // Map each subset-local event back to its global index for the duals.
  std::vector<std::vector<std::size_t>> global_index(subsets.size());
  for (std::size_t t = 0; t < events.size(); ++t)
    global_index[t % subsets.size()].push_back(t);

  std::vector<double> norms = event_row_norms(events, rctx.proj);
  double max_norm = 0.0;
  for (double n : norms) max_norm = std::max(max_norm, n);
  if (!(max_norm > 0.0))
    throw EmptyDataError("every event misses the reconstruction grid");

  double tau = cfg.rho / (cfg.gamma * cfg.n_subsets * max_norm);
  std::vector<double> sigma(events.size(), 0.0);
  for (std::size_t t = 0; t < events.size(); ++t)
    if (norms[t] > 0.0) sigma[t] = cfg.gamma * cfg.rho / norms[t];
  // The TV dual step comes from the step coupling tau * sigma * ||D||^2 <=
  // rho^2 (||D||^2 <= 8 for forward differences), so the gradient block never
  // forces tau below what the event blocks allow.
  double sigma_tv = cfg.rho * cfg.rho / (tau * 8.0);

  // Duals for events start at 0; the duals of undetected bins are fixed at 1
  // by their prox, so their whole contribution folds into a constant image:
  //   corr = sens - A^T 1_events.
  std::vector<double> ones(events.size(), 1.0);
  Image2D corr = back_project(ones, events, rctx.proj);
  {
    const double* w = rctx.sens.data();
    double* c = corr.data();
    for (std::size_t j = 0; j < corr.size(); ++j) c[j] = w[j] - c[j];
  }

  ReconResult result;
  result.image = init;
  Image2D z = corr;
  Image2D zbar = corr;
  std::vector<double> y(events.size(), 0.0);
  std::size_t M = init.size();
  std::vector<double> w_tv;          // TV dual, 2M
  std::vector<double> d_scratch;     // gradient scratch, 2M
  Image2D div_scratch(init.grid());
  if (beta_eff > 0.0) w_tv.assign(2 * M, 0.0);

  std::mt19937_64 rng(cfg.seed);
  double phi0 = std::numeric_limits<double>::quiet_NaN();
  double phi_min = std::numeric_limits<double>::infinity();

  auto penalized = [&](const Image2D& img) {
    double ll = safe_loglik(img, events, rctx, s);
    return -ll + beta_eff * tv_value(img);
  };
  phi0 = penalized(result.image);
  phi_min = phi0;

  std::vector<double> delta;
  for (int it = 1; it <= cfg.n_iterations; ++it) {
    auto order = subset_order(cfg.n_subsets, rng);
    for (int m : order) {
      const EventList& sub = subsets[static_cast<std::size_t>(m)];
      if (sub.empty()) continue;
      {
        double* f = result.image.data();
        const double* zb = zbar.data();
        for (std::size_t j = 0; j < M; ++j)
          f[j] = std::max(0.0, f[j] - tau * zb[j]);
      }
      std::vector<double> fwd = forward_project(result.image, sub, rctx.proj);
      delta.assign(sub.size(), 0.0);
      const auto& gidx = global_index[static_cast<std::size_t>(m)];
      for (std::size_t i = 0; i < sub.size(); ++i) {
        std::size_t t = gidx[i];
        if (sigma[t] == 0.0) continue;
        double yhat = y[t] + sigma[t] * (fwd[i] + s);
        double ynew = 0.5 * (1.0 + yhat -
                             std::sqrt((yhat - 1.0) * (yhat - 1.0) +
                                       4.0 * sigma[t]));
        delta[i] = ynew - y[t];
        y[t] = ynew;
      }
      Image2D dz = back_project(delta, sub, rctx.proj);
      double* zj = z.data();
      double* zb = zbar.data();
      const double* dzj = dz.data();
      double extr = static_cast<double>(cfg.n_subsets);
      for (std::size_t j = 0; j < M; ++j) {
        zj[j] += dzj[j];
        zb[j] = zj[j] + extr * dzj[j];
      }
    }
    if (beta_eff > 0.0) {
      // TV as one extra deterministic dual block per epoch (plain
      // Chambolle-Pock step, no stochastic extrapolation).
      double* f = result.image.data();
      const double* zb = zbar.data();
      for (std::size_t j = 0; j < M; ++j)
        f[j] = std::max(0.0, f[j] - tau * zb[j]);
      grad_forward(result.image, d_scratch);
      for (std::size_t j = 0; j < M; ++j) {
        double wx = w_tv[j] + sigma_tv * d_scratch[j];
        double wy = w_tv[M + j] + sigma_tv * d_scratch[M + j];
        double norm = std::sqrt(wx * wx + wy * wy);
        if (norm > beta_eff) {
          wx *= beta_eff / norm;
          wy *= beta_eff / norm;
        }
        d_scratch[j] = wx - w_tv[j];
        d_scratch[M + j] = wy - w_tv[M + j];
        w_tv[j] = wx;
        w_tv[M + j] = wy;
      }
      div_adjoint(d_scratch, div_scratch);
      double* zj = z.data();
      double* zb2 = zbar.data();
      const double* dzj = div_scratch.data();
      for (std::size_t j = 0; j < M; ++j) {
        zj[j] += dzj[j];
        zb2[j] = zj[j] + dzj[j];
      }
    }
    double phi = penalized(result.image);
    if (cfg.record_objective)
      result.objective.push_back(safe_loglik(result.image, events, rctx, s));
    phi_min = std::min(phi_min, phi);
    double scale = std::max(std::abs(phi0 - phi_min),
                            1e-8 * (std::abs(phi0) + 1.0));
    if (it >= 2 && phi - phi_min > 10.0 * scale)
      throw InvalidConfigError(
          "primal-dual iteration diverged; adjust the step ratio gamma");
    if (on_iterate) on_iterate(it, result.image);
  }
  return result;
}

}  // namespace

double effective_tv_weight(Algorithm alg, double beta,
                           const ReconContext& rctx) {
  if (beta <= 0.0) return 0.0;
  double scale = alg == Algorithm::emtv      ? kEmtvWeightScale
                 : alg == Algorithm::spdhgtv ? kSpdhgWeightScale
                                             : 0.0;
  return beta * scale * mean_positive_sens(rctx);
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "mlem") return Algorithm::mlem;
  if (name == "osem") return Algorithm::osem;
  if (name == "emtv") return Algorithm::emtv;
  if (name == "spdhg") return Algorithm::spdhg;
  if (name == "spdhgtv") return Algorithm::spdhgtv;
  if (name == "lmpd") return Algorithm::lmpd;
  throw InvalidConfigError("unknown algorithm: " + name);
}

std::string algorithm_name(Algorithm alg) {
  switch (alg) {
    case Algorithm::mlem: return "mlem";
    case Algorithm::osem: return "osem";
    case Algorithm::emtv: return "emtv";
    case Algorithm::spdhg: return "spdhg";
    case Algorithm::spdhgtv: return "spdhgtv";
    case Algorithm::lmpd: return "lmpd";
  }
  return "unknown";
}

double poisson_loglik(const Image2D& img, const EventList& events,
                      const ReconContext& rctx, double contamination_mean) {
  double ll = safe_loglik(img, events, rctx, contamination_mean);
  if (!std::isfinite(ll) && !events.empty())
    throw NumericError("log-likelihood is singular: zero expected count");
  return ll;
}

Image2D uniform_init(const ReconContext& rctx, std::size_t n_events) {
  double total = rctx.sens.sum();
  if (!(total > 0.0)) throw NumericError("sensitivity image is empty");
  Image2D x(rctx.proj.grid);
  double level = static_cast<double>(n_events) / total;
  const double* w = rctx.sens.data();
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = w[j] > 0.0 ? level : 0.0;
  return x;
}

double tv_value(const Image2D& img) { return tv_value_smooth(img, 0.0); }

double tv_value_smooth(const Image2D& img, double delta) {
  const GridSpec& g = img.grid();
  double acc = 0.0;
  for (int q = 0; q < g.height; ++q)
    for (int p = 0; p < g.width; ++p) {
      std::size_t j = static_cast<std::size_t>(q) * g.width + p;
      double dx = p + 1 < g.width ? img[j + 1] - img[j] : 0.0;
      double dy = q + 1 < g.height ? img[j + g.width] - img[j] : 0.0;
      acc += std::sqrt(dx * dx + dy * dy + delta * delta) - delta;
    }
  return acc;
}

Image2D tv_grad_smooth(const Image2D& img, double delta) {
  if (!(delta > 0.0)) throw InvalidConfigError("TV smoothing delta must be > 0");
  const GridSpec& g = img.grid();
  Image2D out(g, 0.0);
  for (int q = 0; q < g.height; ++q)
    for (int p = 0; p < g.width; ++p) {
      std::size_t j = static_cast<std::size_t>(q) * g.width + p;
      double dx = p + 1 < g.width ? img[j + 1] - img[j] : 0.0;
      double dy = q + 1 < g.height ? img[j + g.width] - img[j] : 0.0;
      double r = std::sqrt(dx * dx + dy * dy + delta * delta);
      out[j] += -(dx + dy) / r;
      if (p + 1 < g.width) out[j + 1] += dx / r;
      if (q + 1 < g.height) out[j + g.width] += dy / r;
    }
  return out;
}

std::vector<int> subset_order(int n_subsets, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<std::size_t>(n_subsets));
  for (int i = 0; i < n_subsets; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

ReconResult lm_mlem(const EventList& events, const Image2D& init,
                    const ReconConfig& cfg, const ReconContext& rctx,
                    const IterateCallback& on_iterate) {
  ReconConfig c = cfg;
  c.n_subsets = 1;
  return run_em_family(events, init, c, rctx, on_iterate, false);
}

ReconResult lm_osem(const EventList& events, const Image2D& init,
                    const ReconConfig& cfg, const ReconContext& rctx,
                    const IterateCallback& on_iterate) {
  return run_em_family(events, init, cfg, rctx, on_iterate, false);
}

ReconResult lm_em_tv(const EventList& events, const Image2D& init,
                     const ReconConfig& cfg, const ReconContext& rctx,
                     const IterateCallback& on_iterate) {
  return run_em_family(events, init, cfg, rctx, on_iterate, true);
}

ReconResult lm_spdhg(const EventList& events, const Image2D& init,
                     const ReconConfig& cfg, const ReconContext& rctx,
                     const IterateCallback& on_iterate) {
  return run_spdhg(events, init, cfg, rctx, on_iterate, 0.0);
}

ReconResult lm_spdhg_tv(const EventList& events, const Image2D& init,
                        const ReconConfig& cfg, const ReconContext& rctx,
                        const IterateCallback& on_iterate) {
  return run_spdhg(events, init, cfg, rctx, on_iterate, cfg.beta);
}

}  // namespace listrecon
