#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "listrecon/image.hpp"
#include "listrecon/projector.hpp"

namespace listrecon {

enum class Algorithm { mlem, osem, emtv, spdhg, spdhgtv, lmpd };

Algorithm algorithm_from_string(const std::string& name);
std::string algorithm_name(Algorithm alg);

struct ReconConfig {
  Algorithm algorithm = Algorithm::mlem;
  int n_iterations = 10;        ///< epochs: one full pass over all subsets
  int n_subsets = 1;
  double beta = 0.0;            ///< TV weight
  double gamma = 5.0;           ///< primal/dual step ratio
  double rho = 0.999;           ///< step-size safety scale
  double contamination_mean = 0.0;  ///< flat expected contamination per bin
  double epsilon_floor = 1e-12;     ///< guard for ratios against exact zeros
  std::uint64_t seed = 1;           ///< subset-order shuffling
  bool record_objective = true;     ///< log-likelihood per epoch (extra cost)
};

/// Fixed inputs shared by every reconstruction of one acquisition.
struct ReconContext {
  ProjectionContext proj;
  Image2D sens;            ///< sensitivity image over the full enumeration
  std::size_t total_bins;  ///< enumerated (LOR, TOF bin) count
};

struct ReconResult {
  Image2D image;
  std::vector<double> objective;  ///< log-likelihood after each epoch
};

/// Called after every epoch with (epoch index starting at 1, current image).
using IterateCallback = std::function<void(int, const Image2D&)>;

/// List-mode Poisson log-likelihood
///   sum_t log((A img)_t + s) - <sens, img> - total_bins * s.
/// Throws NumericError when some event has (A img)_t + s == 0.
double poisson_loglik(const Image2D& img, const EventList& events,
                      const ReconContext& rctx, double contamination_mean);

/// Count-consistent flat start: N / <sens, 1> where sens > 0, else 0.
Image2D uniform_init(const ReconContext& rctx, std::size_t n_events);

/// Isotropic TV with forward differences and reflective boundary, and its
/// delta-smoothed variant sqrt(dx^2 + dy^2 + delta^2) - delta with gradient.
double tv_value(const Image2D& img);
double tv_value_smooth(const Image2D& img, double delta);
Image2D tv_grad_smooth(const Image2D& img, double delta);

/// Internal TV weight for a user-facing beta: beta scaled by the mean
/// positive sensitivity (count/unit invariance) and a per-algorithm
/// calibration constant. Zero for algorithms without a TV term.
double effective_tv_weight(Algorithm alg, double beta,
                           const ReconContext& rctx);

/// Deterministic subset visit order for one epoch, shared by every subset
/// algorithm (and their test references): a Fisher-Yates shuffle of
/// [0, n_subsets) driven by the given generator.
std::vector<int> subset_order(int n_subsets, std::mt19937_64& rng);

ReconResult lm_mlem(const EventList& events, const Image2D& init,
                    const ReconConfig& cfg, const ReconContext& rctx,
                    const IterateCallback& on_iterate = {});
ReconResult lm_osem(const EventList& events, const Image2D& init,
                    const ReconConfig& cfg, const ReconContext& rctx,
                    const IterateCallback& on_iterate = {});
ReconResult lm_em_tv(const EventList& events, const Image2D& init,
                     const ReconConfig& cfg, const ReconContext& rctx,
                     const IterateCallback& on_iterate = {});
ReconResult lm_spdhg(const EventList& events, const Image2D& init,
                     const ReconConfig& cfg, const ReconContext& rctx,
                     const IterateCallback& on_iterate = {});
ReconResult lm_spdhg_tv(const EventList& events, const Image2D& init,
                        const ReconConfig& cfg, const ReconContext& rctx,
                        const IterateCallback& on_iterate = {});

}  // namespace listrecon
