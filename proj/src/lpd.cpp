#include "listrecon/lpd.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "listrecon/io.hpp"

namespace listrecon {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

double prelu(double x, double slope) { return x > 0.0 ? x : slope * x; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  unsigned char buf[16];
  std::memcpy(buf, &seed, 8);
  std::memcpy(buf + 8, &salt, 8);
  return fnv1a64(std::span<const unsigned char>(buf, 16));
}

}  // namespace

void NetworkConfig::validate() const {
  if (n_phases < 0) throw InvalidConfigError("phase count must be >= 0");
  if (dual_hidden.empty())
    throw InvalidConfigError("dual MLP needs at least one hidden layer");
  for (int w : dual_hidden)
    if (w < 1) throw InvalidConfigError("dual hidden widths must be >= 1");
  if (primal_channels.size() < 2 || primal_channels.front() != 2 ||
      primal_channels.back() != 1)
    throw InvalidConfigError(
        "primal channel list must start at 2 (f, A^T h) and end at 1");
  for (int c : primal_channels)
    if (c < 1) throw InvalidConfigError("channel counts must be >= 1");
  if (kernel < 1 || kernel % 2 == 0)
    throw InvalidConfigError("conv kernel must be odd and >= 1");
}

std::uint64_t NetworkConfig::hash() const {
  std::string buf;
  auto put_i32 = [&buf](std::int32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    buf.append(b, 4);
  };
  put_i32(n_phases);
  put_i32(shared_weights ? 1 : 0);
  put_i32(kernel);
  put_i32(static_cast<std::int32_t>(dual_hidden.size()));
  for (int w : dual_hidden) put_i32(w);
  put_i32(static_cast<std::int32_t>(primal_channels.size()));
  for (int c : primal_channels) put_i32(c);
  return fnv1a64(buf);
}

NetworkLayout build_layout(const NetworkConfig& cfg) {
  cfg.validate();
  NetworkLayout layout;
  std::size_t off = 0, roff = 0;
  auto claim = [&off](std::size_t n) {
    ParamRange r{off, n};
    off += n;
    return r;
  };
  for (int k = 0; k < cfg.param_phases(); ++k) {
    PhaseLayout phase;
    std::vector<int> widths;
    widths.push_back(3);
    widths.insert(widths.end(), cfg.dual_hidden.begin(),
                  cfg.dual_hidden.end());
    widths.push_back(1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      LinearLayout lin;
      lin.in = widths[l];
      lin.out = widths[l + 1];
      lin.w = claim(static_cast<std::size_t>(lin.in) * lin.out);
      lin.b = claim(static_cast<std::size_t>(lin.out));
      if (l + 2 < widths.size()) lin.slope = claim(1);
      phase.dual.push_back(lin);
    }
    const auto& ch = cfg.primal_channels;
    for (std::size_t l = 0; l + 1 < ch.size(); ++l) {
      ConvLayout conv;
      conv.cin = ch[l];
      conv.cout = ch[l + 1];
      conv.bn_act = l + 2 < ch.size();
      conv.k = claim(static_cast<std::size_t>(conv.cout) * conv.cin *
                     cfg.kernel * cfg.kernel);
      conv.b = claim(static_cast<std::size_t>(conv.cout));
      if (conv.bn_act) {
        conv.gamma = claim(static_cast<std::size_t>(conv.cout));
        conv.beta = claim(static_cast<std::size_t>(conv.cout));
        conv.slope = claim(1);
        conv.rmean = ParamRange{roff, static_cast<std::size_t>(conv.cout)};
        roff += conv.cout;
        conv.rvar = ParamRange{roff, static_cast<std::size_t>(conv.cout)};
        roff += conv.cout;
      }
      phase.conv.push_back(conv);
    }
    layout.phases.push_back(std::move(phase));
  }
  layout.n_params = off;
  layout.n_running = roff;
  return layout;
}

NetworkParams init_network(const NetworkConfig& cfg, std::uint64_t seed) {
  NetworkParams params;
  params.cfg = cfg;
  params.layout = build_layout(cfg);
  params.values.assign(params.layout.n_params, 0.0);
  params.running.assign(params.layout.n_running, 0.0);
  std::mt19937_64 rng(seed);
  auto uniform_fill = [&](const ParamRange& r, double bound) {
    std::uniform_real_distribution<double> draw(-bound, bound);
    for (std::size_t i = 0; i < r.count; ++i)
      params.values[r.offset + i] = draw(rng);
  };
  auto const_fill = [&](std::vector<double>& dst, const ParamRange& r,
                        double v) {
    for (std::size_t i = 0; i < r.count; ++i) dst[r.offset + i] = v;
  };
  for (const PhaseLayout& phase : params.layout.phases) {
    for (const LinearLayout& lin : phase.dual) {
      double bound = 1.0 / std::sqrt(static_cast<double>(lin.in));
      uniform_fill(lin.w, bound);
      uniform_fill(lin.b, bound);
      if (lin.slope.count) params.values[lin.slope.offset] = 0.25;
    }
    for (const ConvLayout& conv : phase.conv) {
      double fan_in = static_cast<double>(conv.cin) * cfg.kernel * cfg.kernel;
      double bound = 1.0 / std::sqrt(fan_in);
      uniform_fill(conv.k, bound);
      uniform_fill(conv.b, bound);
      if (conv.bn_act) {
        const_fill(params.values, conv.gamma, 1.0);
        const_fill(params.values, conv.beta, 0.0);
        params.values[conv.slope.offset] = 0.25;
        const_fill(params.running, conv.rmean, 0.0);
        const_fill(params.running, conv.rvar, 1.0);
      }
    }
  }
  return params;
}

namespace {

/// z[oc] = b[oc] + sum_ic K[oc][ic] * x[ic], 'same' zero padding.
void conv2d_forward(const double* x, int cin, int W, int H, const double* K,
                    const double* b, int cout, int ks, double* z) {
  int r = ks / 2;
  std::size_t hw = static_cast<std::size_t>(W) * H;
  for (int oc = 0; oc < cout; ++oc) {
    double* zp = z + oc * hw;
    for (std::size_t i = 0; i < hw; ++i) zp[i] = b[oc];
    for (int ic = 0; ic < cin; ++ic) {
      const double* xp = x + ic * hw;
      const double* kp = K + ((static_cast<std::size_t>(oc) * cin + ic) * ks) * ks;
      for (int oy = 0; oy < H; ++oy)
        for (int ox = 0; ox < W; ++ox) {
          double acc = 0.0;
          for (int ky = 0; ky < ks; ++ky) {
            int iy = oy + ky - r;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < ks; ++kx) {
              int ix = ox + kx - r;
              if (ix < 0 || ix >= W) continue;
              acc += kp[ky * ks + kx] * xp[iy * W + ix];
            }
          }
          zp[oy * W + ox] += acc;
        }
    }
  }
}

/// dx[ic] += sum_oc K[oc][ic] (correlated against dz); dK and db accumulate.
void conv2d_backward(const double* x, int cin, int W, int H, const double* K,
                     int cout, int ks, const double* dz, double* dx,
                     double* dK, double* db) {
  int r = ks / 2;
  std::size_t hw = static_cast<std::size_t>(W) * H;
  for (int oc = 0; oc < cout; ++oc) {
    const double* dzp = dz + oc * hw;
    double acc_b = 0.0;
    for (std::size_t i = 0; i < hw; ++i) acc_b += dzp[i];
    db[oc] += acc_b;
    for (int ic = 0; ic < cin; ++ic) {
      const double* xp = x + ic * hw;
      double* dxp = dx + ic * hw;
      const double* kp = K + ((static_cast<std::size_t>(oc) * cin + ic) * ks) * ks;
      double* dkp = dK + ((static_cast<std::size_t>(oc) * cin + ic) * ks) * ks;
      for (int oy = 0; oy < H; ++oy)
        for (int ox = 0; ox < W; ++ox) {
          double g = dzp[oy * W + ox];
          if (g == 0.0) continue;
          for (int ky = 0; ky < ks; ++ky) {
            int iy = oy + ky - r;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < ks; ++kx) {
              int ix = ox + kx - r;
              if (ix < 0 || ix >= W) continue;
              dkp[ky * ks + kx] += g * xp[iy * W + ix];
              dxp[iy * W + ix] += g * kp[ky * ks + kx];
            }
          }
        }
    }
  }
}

}  // namespace

Image2D lmpd_forward(NetworkParams& params, const EventList& events,
                     const ProjectionContext& ctx, const LmpdOptions& opt,
                     LmpdTrace* trace, std::vector<Image2D>* per_phase) {
  params.cfg.validate();
  const NetworkConfig& cfg = params.cfg;
  std::size_t N = events.size();
  std::size_t hw = ctx.grid.pixel_count();
  if (hw < 2) throw DimensionError("network needs at least 2 pixels");
  const double* v = params.values.data();

  if (trace) {
    trace->train_mode = opt.train_mode;
    trace->n_events = N;
    trace->phases.clear();
  }
  if (per_phase) per_phase->clear();

  Image2D f(ctx.grid, 0.0);
  std::vector<double> h(N, 0.0);

  for (int k = 0; k < cfg.n_phases; ++k) {
    const PhaseLayout& phase =
        params.layout.phases[cfg.shared_weights ? 0 : static_cast<std::size_t>(k)];
    PhaseTrace pt;

    // Dual update: h <- MLP([Af, 1, h]) per event.
    std::vector<double> af = forward_project(f, events, ctx);
    if (trace) pt.af = af;
    std::vector<double> rows(N * 3);
    for (std::size_t t = 0; t < N; ++t) {
      rows[t * 3 + 0] = af[t];
      rows[t * 3 + 1] = 1.0;
      rows[t * 3 + 2] = h[t];
    }
    std::vector<double> cur = std::move(rows);
    int cur_w = 3;
    for (std::size_t l = 0; l < phase.dual.size(); ++l) {
      const LinearLayout& lin = phase.dual[l];
      if (trace) pt.lin_in.push_back(cur);
      std::vector<double> z(N * static_cast<std::size_t>(lin.out));
      const double* W = v + lin.w.offset;
      const double* b = v + lin.b.offset;
      for (std::size_t t = 0; t < N; ++t) {
        const double* in = cur.data() + t * cur_w;
        double* out = z.data() + t * lin.out;
        for (int o = 0; o < lin.out; ++o) {
          double acc = b[o];
          const double* wrow = W + static_cast<std::size_t>(o) * lin.in;
          for (int i = 0; i < lin.in; ++i) acc += wrow[i] * in[i];
          out[o] = acc;
        }
      }
      if (trace) pt.lin_z.push_back(z);
      if (lin.slope.count) {
        double slope = v[lin.slope.offset];
        for (double& x : z) x = prelu(x, slope);
      }
      cur = std::move(z);
      cur_w = lin.out;
    }
    h = std::move(cur);  // final layer width is 1
    if (trace) pt.h = h;

    // Primal update: f <- CNN([f, A^T h]).
    Image2D bp = back_project(h, events, ctx);
    if (trace) pt.bp = bp;
    std::vector<double> img(2 * hw);
    std::copy(f.values().begin(), f.values().end(), img.begin());
    std::copy(bp.values().begin(), bp.values().end(), img.begin() + hw);
    int cur_c = 2;
    for (std::size_t l = 0; l < phase.conv.size(); ++l) {
      const ConvLayout& conv = phase.conv[l];
      if (trace) pt.conv_in.push_back(img);
      std::vector<double> z(static_cast<std::size_t>(conv.cout) * hw);
      conv2d_forward(img.data(), cur_c, ctx.grid.width, ctx.grid.height,
                     v + conv.k.offset, v + conv.b.offset, conv.cout,
                     cfg.kernel, z.data());
      if (trace) pt.conv_z.push_back(z);
      if (conv.bn_act) {
        std::vector<double> invstd(static_cast<std::size_t>(conv.cout));
        std::vector<double> xhat(z.size());
        double n = static_cast<double>(hw);
        for (int c = 0; c < conv.cout; ++c) {
          double* zc = z.data() + static_cast<std::size_t>(c) * hw;
          double* xc = xhat.data() + static_cast<std::size_t>(c) * hw;
          double mean, var;
          if (opt.train_mode) {
            mean = 0.0;
            for (std::size_t i = 0; i < hw; ++i) mean += zc[i];
            mean /= n;
            var = 0.0;
            for (std::size_t i = 0; i < hw; ++i)
              var += (zc[i] - mean) * (zc[i] - mean);
            var /= n;  // biased, used for normalization
            if (opt.update_running) {
              double unbiased = var * n / (n - 1.0);
              double& rm = params.running[conv.rmean.offset + c];
              double& rv = params.running[conv.rvar.offset + c];
              rm = (1.0 - kBnMomentum) * rm + kBnMomentum * mean;
              rv = (1.0 - kBnMomentum) * rv + kBnMomentum * unbiased;
            }
          } else {
            mean = params.running[conv.rmean.offset + c];
            var = params.running[conv.rvar.offset + c];
          }
          double is = 1.0 / std::sqrt(var + kBnEps);
          invstd[static_cast<std::size_t>(c)] = is;
          for (std::size_t i = 0; i < hw; ++i) xc[i] = (zc[i] - mean) * is;
        }
        if (trace) {
          pt.bn_invstd.push_back(invstd);
          pt.conv_xhat.push_back(xhat);
        }
        double slope = v[conv.slope.offset];
        std::vector<double> y(z.size());
        for (int c = 0; c < conv.cout; ++c) {
          double g = v[conv.gamma.offset + c];
          double be = v[conv.beta.offset + c];
          const double* xc = xhat.data() + static_cast<std::size_t>(c) * hw;
          double* yc = y.data() + static_cast<std::size_t>(c) * hw;
          for (std::size_t i = 0; i < hw; ++i) yc[i] = g * xc[i] + be;
        }
        if (trace) pt.conv_y.push_back(y);
        for (double& x : y) x = prelu(x, slope);
        img = std::move(y);
      } else {
        img = std::move(z);
      }
      cur_c = conv.cout;
    }
    for (std::size_t i = 0; i < hw; ++i) f[i] = img[i];
    if (trace) {
      pt.f = f;
      trace->phases.push_back(std::move(pt));
    }
    if (per_phase) per_phase->push_back(f);
  }
  return f;
}

std::vector<double> lmpd_backward(const NetworkParams& params,
                                  const LmpdTrace& trace,
                                  const Image2D& loss_grad,
                                  const EventList& events,
                                  const ProjectionContext& ctx) {
  const NetworkConfig& cfg = params.cfg;
  if (trace.phases.size() != static_cast<std::size_t>(cfg.n_phases) ||
      trace.n_events != events.size())
    throw Error(ErrorCode::generic,
                "backward pass needs the trace of a matching forward pass");
  if (!trace.train_mode && cfg.n_phases > 0) {
    bool has_bn = false;
    for (const auto& phase : params.layout.phases)
      for (const auto& conv : phase.conv) has_bn = has_bn || conv.bn_act;
    if (has_bn)
      throw Error(ErrorCode::generic,
                  "backward through batchnorm needs a train-mode trace");
  }
  std::size_t N = events.size();
  std::size_t hw = ctx.grid.pixel_count();
  const double* v = params.values.data();
  std::vector<double> grad(params.layout.n_params, 0.0);

  Image2D df = loss_grad;          // d loss / d f_k
  std::vector<double> dh(N, 0.0);  // d loss / d h_k carried from phase k+1

  for (int k = cfg.n_phases - 1; k >= 0; --k) {
    const PhaseLayout& phase =
        params.layout.phases[cfg.shared_weights ? 0 : static_cast<std::size_t>(k)];
    const PhaseTrace& pt = trace.phases[static_cast<std::size_t>(k)];

    // ---- primal (CNN) backward ----
    std::vector<double> dimg(df.values());
    std::size_t bn_idx = pt.conv_xhat.size();
    for (std::size_t li = phase.conv.size(); li-- > 0;) {
      const ConvLayout& conv = phase.conv[li];
      std::vector<double> dz;
      if (conv.bn_act) {
        --bn_idx;
        const std::vector<double>& y = pt.conv_y[bn_idx];
        const std::vector<double>& xhat = pt.conv_xhat[bn_idx];
        const std::vector<double>& invstd = pt.bn_invstd[bn_idx];
        double slope = v[conv.slope.offset];
        // PReLU backward.
        std::vector<double> dy(dimg.size());
        double dslope = 0.0;
        for (std::size_t i = 0; i < dimg.size(); ++i) {
          if (y[i] > 0.0) {
            dy[i] = dimg[i];
          } else {
            dy[i] = dimg[i] * slope;
            dslope += dimg[i] * y[i];
          }
        }
        grad[conv.slope.offset] += dslope;
        // Affine backward.
        dz.assign(dimg.size(), 0.0);
        double n = static_cast<double>(hw);
        for (int c = 0; c < conv.cout; ++c) {
          std::size_t base = static_cast<std::size_t>(c) * hw;
          double g = v[conv.gamma.offset + c];
          double dgamma = 0.0, dbeta = 0.0;
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t i = 0; i < hw; ++i) {
            double d = dy[base + i];
            dgamma += d * xhat[base + i];
            dbeta += d;
            double dxh = d * g;
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xhat[base + i];
          }
          grad[conv.gamma.offset + c] += dgamma;
          grad[conv.beta.offset + c] += dbeta;
          double is = invstd[static_cast<std::size_t>(c)];
          for (std::size_t i = 0; i < hw; ++i) {
            double dxh = dy[base + i] * g;
            dz[base + i] = is * (dxh - sum_dxhat / n -
                                 xhat[base + i] * sum_dxhat_xhat / n);
          }
        }
      } else {
        dz = std::move(dimg);
      }
      const std::vector<double>& x = pt.conv_in[li];
      std::vector<double> dx(static_cast<std::size_t>(conv.cin) * hw, 0.0);
      conv2d_backward(x.data(), conv.cin, ctx.grid.width, ctx.grid.height,
                      v + conv.k.offset, conv.cout, cfg.kernel, dz.data(),
                      dx.data(), grad.data() + conv.k.offset,
                      grad.data() + conv.b.offset);
      dimg = std::move(dx);
    }
    // dimg now holds the 2-channel input gradient: [d f_{k-1}, d bp].
    Image2D df_prev(ctx.grid);
    Image2D dbp(ctx.grid);
    for (std::size_t i = 0; i < hw; ++i) {
      df_prev[i] = dimg[i];
      dbp[i] = dimg[hw + i];
    }

    // bp = A^T h_k, so d h_k += A(d bp); add the carry from phase k+1.
    std::vector<double> dh_total = forward_project(dbp, events, ctx);
    for (std::size_t t = 0; t < N; ++t) dh_total[t] += dh[t];

    // ---- dual (MLP) backward ----
    std::vector<double> dcur = std::move(dh_total);  // width 1
    for (std::size_t li = phase.dual.size(); li-- > 0;) {
      const LinearLayout& lin = phase.dual[li];
      const std::vector<double>& z = pt.lin_z[li];
      if (lin.slope.count) {
        double slope = v[lin.slope.offset];
        double dslope = 0.0;
        for (std::size_t i = 0; i < dcur.size(); ++i) {
          if (z[i] <= 0.0) {
            dslope += dcur[i] * z[i];
            dcur[i] *= slope;
          }
        }
        grad[lin.slope.offset] += dslope;
      }
      const std::vector<double>& in = pt.lin_in[li];
      std::vector<double> din(N * static_cast<std::size_t>(lin.in), 0.0);
      const double* W = v + lin.w.offset;
      for (std::size_t t = 0; t < N; ++t) {
        const double* inp = in.data() + t * lin.in;
        const double* d = dcur.data() + t * lin.out;
        double* dinp = din.data() + t * lin.in;
        for (int o = 0; o < lin.out; ++o) {
          double g = d[o];
          grad[lin.b.offset + o] += g;
          double* dwrow = grad.data() + lin.w.offset +
                          static_cast<std::size_t>(o) * lin.in;
          const double* wrow = W + static_cast<std::size_t>(o) * lin.in;
          for (int i = 0; i < lin.in; ++i) {
            dwrow[i] += g * inp[i];
            dinp[i] += g * wrow[i];
          }
        }
      }
      dcur = std::move(din);
    }
    // Input rows were [af, g, h_{k-1}]: af feeds back through the projector,
    // the constant g column is dropped, h flows to the previous phase.
    std::vector<double> daf(N);
    for (std::size_t t = 0; t < N; ++t) {
      daf[t] = dcur[t * 3 + 0];
      dh[t] = dcur[t * 3 + 2];
    }
    Image2D daf_img = back_project(daf, events, ctx);
    const double* s = daf_img.data();
    for (std::size_t i = 0; i < hw; ++i) df[i] = df_prev[i] + s[i];
  }
  return grad;
}

double mse(const Image2D& a, const Image2D& b) {
  if (!(a.grid() == b.grid())) throw DimensionError("MSE images differ in shape");
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double d = a[j] - b[j];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

Image2D mse_grad(const Image2D& a, const Image2D& b) {
  if (!(a.grid() == b.grid())) throw DimensionError("MSE images differ in shape");
  Image2D g(a.grid());
  double scale = 2.0 / static_cast<double>(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) g[j] = scale * (a[j] - b[j]);
  return g;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad,
               AdamState& state, double lr, double beta1, double beta2,
               double eps) {
  if (grad.size() != params.size())
    throw DimensionError("gradient size does not match parameters");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size())
    throw DimensionError("optimizer state does not match parameters");
  ++state.step;
  double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    double mhat = state.m[i] / c1;
    double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

TrainResult train_toy(const std::vector<TrainSample>& train_set,
                      const std::vector<TrainSample>& val_set,
                      TrainState& state, const TrainConfig& tc,
                      const ProjectionContext& ctx) {
  if (train_set.empty() || val_set.empty())
    throw EmptyDataError("training needs non-empty train and validation sets");
  for (const auto& s : train_set)
    if (!(s.truth.grid() == ctx.grid))
      throw DimensionError("training truth grid does not match context");
  for (const auto& s : val_set)
    if (!(s.truth.grid() == ctx.grid))
      throw DimensionError("validation truth grid does not match context");
  if (tc.epochs < 0) throw InvalidConfigError("epoch count must be >= 0");

  auto validate = [&](NetworkParams& p) {
    LmpdOptions opt;  // eval mode
    double acc = 0.0;
    for (const auto& s : val_set)
      acc += mse(lmpd_forward(p, s.events, ctx, opt), s.truth);
    return acc / static_cast<double>(val_set.size());
  };

  TrainResult result;
  if (state.next_epoch == 0) {
    result.initial_val = validate(state.params);
    state.best = state.params;
    state.best_val = result.initial_val;
    state.best_epoch = -1;
  } else {
    result.initial_val = state.best_val;
  }

  for (int e = state.next_epoch; e < tc.epochs; ++e) {
    std::mt19937_64 rng(mix_seed(tc.seed, static_cast<std::uint64_t>(e)));
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    bool bad = false;
    for (std::size_t i : order) {
      const TrainSample& sample = train_set[i];
      LmpdOptions opt;
      opt.train_mode = true;
      opt.update_running = true;
      opt.record = true;
      LmpdTrace trace;
      Image2D out = lmpd_forward(state.params, sample.events, ctx, opt, &trace);
      double loss = mse(out, sample.truth);
      if (!std::isfinite(loss)) {
        bad = true;
        break;
      }
      epoch_loss += loss;
      std::vector<double> grad = lmpd_backward(
          state.params, trace, mse_grad(out, sample.truth), sample.events, ctx);
      adam_step(state.params.values, grad, state.adam, tc.lr, tc.beta1,
                tc.beta2, tc.adam_eps);
    }
    if (bad) {
      result.diverged = true;
      break;
    }
    epoch_loss /= static_cast<double>(train_set.size());
    double val = validate(state.params);
    result.train_loss.push_back(epoch_loss);
    result.val_loss.push_back(val);
    state.next_epoch = e + 1;
    if (!std::isfinite(val)) {
      result.diverged = true;
      break;
    }
    if (val < state.best_val) {
      state.best_val = val;
      state.best = state.params;
      state.best_epoch = e;
    }
  }
  return result;
}

namespace {

void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}
template <class T>
void put(std::string& out, T v) {
  put_bytes(out, &v, sizeof(T));
}
template <class T>
T take(const std::string& in, std::size_t& off, const char* what) {
  if (off + sizeof(T) > in.size())
    throw IoError(std::string("truncated checkpoint: ") + what);
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

void put_vec(std::string& out, const std::vector<double>& v) {
  put<std::uint64_t>(out, v.size());
  put_bytes(out, v.data(), v.size() * sizeof(double));
}

std::vector<double> take_vec(const std::string& in, std::size_t& off,
                             const char* what) {
  auto n = take<std::uint64_t>(in, off, what);
  if (off + n * sizeof(double) > in.size())
    throw IoError(std::string("truncated checkpoint: ") + what);
  std::vector<double> v(n);
  std::memcpy(v.data(), in.data() + off, n * sizeof(double));
  off += n * sizeof(double);
  return v;
}

void put_params(std::string& out, const NetworkParams& p) {
  put_vec(out, p.values);
  put_vec(out, p.running);
}

NetworkParams take_params(const std::string& in, std::size_t& off,
                          const NetworkConfig& cfg) {
  NetworkParams p;
  p.cfg = cfg;
  p.layout = build_layout(cfg);
  p.values = take_vec(in, off, "parameters");
  p.running = take_vec(in, off, "running stats");
  if (p.values.size() != p.layout.n_params ||
      p.running.size() != p.layout.n_running)
    throw IoError("checkpoint parameter blocks do not match its config");
  return p;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state,
                     bool with_train_state) {
  const NetworkConfig& cfg = state.params.cfg;
  std::string out;
  out.append("LMPD", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint64_t>(out, cfg.hash());
  put<std::int32_t>(out, cfg.n_phases);
  put<std::uint8_t>(out, cfg.shared_weights ? 1 : 0);
  put<std::int32_t>(out, cfg.kernel);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.dual_hidden.size()));
  for (int w : cfg.dual_hidden) put<std::int32_t>(out, w);
  put<std::uint32_t>(out,
                     static_cast<std::uint32_t>(cfg.primal_channels.size()));
  for (int c : cfg.primal_channels) put<std::int32_t>(out, c);
  put_params(out, state.best);
  put<std::uint8_t>(out, with_train_state ? 1 : 0);
  if (with_train_state) {
    put_params(out, state.params);
    put_vec(out, state.adam.m);
    put_vec(out, state.adam.v);
    put<std::int64_t>(out, state.adam.step);
    put<std::int32_t>(out, state.next_epoch);
    put<double>(out, state.best_val);
    put<std::int32_t>(out, state.best_epoch);
  }
  write_text_file(path, out);
}

TrainState load_checkpoint(const std::string& path) {
  std::string in = read_text_file(path);
  if (in.size() < 4 || in.compare(0, 4, "LMPD") != 0)
    throw IoError("bad magic in checkpoint: " + path);
  std::size_t off = 4;
  auto version = take<std::uint32_t>(in, off, "version");
  if (version != 1)
    throw IoError("unsupported checkpoint version: " + std::to_string(version));
  auto stored_hash = take<std::uint64_t>(in, off, "config hash");
  NetworkConfig cfg;
  cfg.n_phases = take<std::int32_t>(in, off, "phase count");
  cfg.shared_weights = take<std::uint8_t>(in, off, "shared flag") != 0;
  cfg.kernel = take<std::int32_t>(in, off, "kernel");
  auto nh = take<std::uint32_t>(in, off, "hidden count");
  cfg.dual_hidden.resize(nh);
  for (auto& w : cfg.dual_hidden) w = take<std::int32_t>(in, off, "hidden");
  auto nc = take<std::uint32_t>(in, off, "channel count");
  cfg.primal_channels.resize(nc);
  for (auto& c : cfg.primal_channels)
    c = take<std::int32_t>(in, off, "channel");
  if (cfg.hash() != stored_hash)
    throw IoError("checkpoint config hash does not match its header: " + path);

  TrainState state;
  state.best = take_params(in, off, cfg);
  auto has_train = take<std::uint8_t>(in, off, "train flag");
  if (has_train) {
    state.params = take_params(in, off, cfg);
    state.adam.m = take_vec(in, off, "adam m");
    state.adam.v = take_vec(in, off, "adam v");
    state.adam.step = take<std::int64_t>(in, off, "adam step");
    state.next_epoch = take<std::int32_t>(in, off, "epoch");
    state.best_val = take<double>(in, off, "best val");
    state.best_epoch = take<std::int32_t>(in, off, "best epoch");
  } else {
    state.params = state.best;
    state.best_val = std::numeric_limits<double>::infinity();
  }
  return state;
}

}  // namespace listrecon
