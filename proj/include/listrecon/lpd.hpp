#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "listrecon/image.hpp"
#include "listrecon/projector.hpp"

namespace listrecon {

/// Architecture of the unrolled primal-dual network: per phase, a per-event
/// MLP on [Af, g, h] rows updates the list-mode dual h, and a small CNN on
/// [f, A^T h] channels updates the image f.
struct NetworkConfig {
  int n_phases = 8;
  std::vector<int> dual_hidden{64, 16};
  std::vector<int> primal_channels{2, 64, 128, 256, 64, 1};
  int kernel = 3;
  bool shared_weights = false;  ///< one parameter set reused by every phase

  void validate() const;
  int param_phases() const { return shared_weights ? 1 : n_phases; }
  std::uint64_t hash() const;
};

struct ParamRange {
  std::size_t offset = 0;
  std::size_t count = 0;
};

struct LinearLayout {
  ParamRange w, b, slope;  ///< slope.count == 0 on the output layer
  int in = 0, out = 0;
};

struct ConvLayout {
  ParamRange k, b, gamma, beta, slope;  ///< affine/act absent on last layer
  ParamRange rmean, rvar;               ///< offsets into the running buffer
  int cin = 0, cout = 0;
  bool bn_act = false;
};

struct PhaseLayout {
  std::vector<LinearLayout> dual;
  std::vector<ConvLayout> conv;
};

/// Flat parameter layout in declaration order: for each parameter phase, the
/// dual layers (weights, bias, slope) then the conv layers (kernel, bias,
/// bn scale, bn shift, slope).  Batchnorm running statistics live in a
/// separate non-trainable buffer.
struct NetworkLayout {
  std::vector<PhaseLayout> phases;
  std::size_t n_params = 0;
  std::size_t n_running = 0;
};

NetworkLayout build_layout(const NetworkConfig& cfg);

struct NetworkParams {
  NetworkConfig cfg;
  NetworkLayout layout;
  std::vector<double> values;   ///< trainable, layout order
  std::vector<double> running;  ///< bn running mean/var per bn layer
};

/// Kaiming-uniform fan-in init (weights and biases in
/// +-1/sqrt(fan_in)), PReLU slopes 0.25, bn scale 1 / shift 0, running
/// mean 0 / var 1.  Deterministic per seed.
NetworkParams init_network(const NetworkConfig& cfg, std::uint64_t seed);

struct LmpdOptions {
  bool train_mode = false;      ///< batchnorm uses batch statistics
  bool update_running = false;  ///< fold batch stats into running (train only)
  bool record = false;          ///< keep activations for a backward pass
};

/// Recorded activations of one forward pass, consumed by lmpd_backward.
struct PhaseTrace {
  std::vector<double> af;
  std::vector<std::vector<double>> lin_in;
  std::vector<std::vector<double>> lin_z;
  std::vector<double> h;
  Image2D bp;
  std::vector<std::vector<double>> conv_in;
  std::vector<std::vector<double>> conv_z;
  std::vector<std::vector<double>> conv_xhat;
  std::vector<std::vector<double>> conv_y;
  std::vector<std::vector<double>> bn_invstd;
  Image2D f;
};

struct LmpdTrace {
  bool train_mode = false;
  std::size_t n_events = 0;
  std::vector<PhaseTrace> phases;
};

/// Runs the K unrolled phases from f0 = 0, h0 = 0 and returns f_K.  The
/// per-event g channel is the constant 1 (one count per event).  Mutates
/// params.running only when train_mode and update_running are both set.
Image2D lmpd_forward(NetworkParams& params, const EventList& events,
                     const ProjectionContext& ctx, const LmpdOptions& opt,
                     LmpdTrace* trace = nullptr,
                     std::vector<Image2D>* per_phase = nullptr);

/// Reverse-mode gradient of a scalar loss with the given d loss / d f_K.
/// Requires a trace recorded in train mode; returns the flat gradient
/// aligned with params.values.
std::vector<double> lmpd_backward(const NetworkParams& params,
                                  const LmpdTrace& trace,
                                  const Image2D& loss_grad,
                                  const EventList& events,
                                  const ProjectionContext& ctx);

double mse(const Image2D& a, const Image2D& b);
Image2D mse_grad(const Image2D& a, const Image2D& b);

struct AdamState {
  std::vector<double> m, v;
  std::int64_t step = 0;
};

void adam_step(std::vector<double>& params, const std::vector<double>& grad,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

struct TrainSample {
  EventList events;
  Image2D truth;
};

struct TrainConfig {
  int epochs = 200;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
};

/// Resumable training snapshot; serialized as the checkpoint file.
struct TrainState {
  NetworkParams params;  ///< current
  NetworkParams best;    ///< minimum-validation-loss snapshot
  AdamState adam;
  int next_epoch = 0;
  double best_val = 0.0;
  int best_epoch = -1;
};

struct TrainResult {
  std::vector<double> train_loss;  ///< mean MSE per epoch
  std::vector<double> val_loss;    ///< eval-mode MSE per epoch
  double initial_val = 0.0;        ///< validation MSE before any update
  bool diverged = false;
};

/// Adam on per-sample MSE (batch size 1), shuffled sample order per epoch,
/// eval-mode validation after each epoch, minimum-validation checkpointing
/// into state.best.  Resumes from state.next_epoch; identical continuation
/// for a given seed.  A non-finite loss stops training with diverged set
/// (state keeps the last good snapshot).
TrainResult train_toy(const std::vector<TrainSample>& train_set,
                      const std::vector<TrainSample>& val_set,
                      TrainState& state, const TrainConfig& tc,
                      const ProjectionContext& ctx);

/// Checkpoint file ("LMPD"): config header + flat parameter and running
/// blocks, optionally the full training state for exact resume.
void save_checkpoint(const std::string& path, const TrainState& state,
                     bool with_train_state);
TrainState load_checkpoint(const std::string& path);

}  // namespace listrecon
