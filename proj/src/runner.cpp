#include "listrecon/runner.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "listrecon/errors.hpp"
#include "listrecon/geometry.hpp"
#include "listrecon/image.hpp"
#include "listrecon/io.hpp"
#include "listrecon/lpd.hpp"
#include "listrecon/metrics.hpp"
#include "listrecon/phantom.hpp"
#include "listrecon/projector.hpp"
#include "listrecon/recon.hpp"
#include "listrecon/simulate.hpp"

namespace fs = std::filesystem;

namespace listrecon {

namespace {

/// Scanner/grid/TOF settings shared by every stage.
struct Setup {
  ScannerGeometry scanner;
  GridSpec grid;
  TofSpec tof;
  double min_angle = 90.0;
  int threads = 0;

  ProjectionContext context() const { return {scanner, grid, tof, threads}; }
  std::uint64_t hash() const { return geometry_hash(scanner, tof, grid); }
};

Setup make_setup(const RunConfig& cfg) {
  Setup s;
  s.scanner = build_scanner(
      static_cast<int>(cfg.get_int_or("scanner.modules", 28)),
      static_cast<int>(cfg.get_int_or("scanner.crystals_per_module", 16)),
      cfg.get_double_or("scanner.radius_mm", 300.0),
      cfg.get_double_or("scanner.crystal_width_mm", 4.0));
  int size = static_cast<int>(cfg.get_int_or("grid.size", 128));
  s.grid.width = static_cast<int>(cfg.get_int_or("grid.width", size));
  s.grid.height = static_cast<int>(cfg.get_int_or("grid.height", size));
  s.grid.spacing = cfg.get_double_or("grid.spacing_mm", 2.086);
  if (s.grid.width < 1 || s.grid.height < 1 || !(s.grid.spacing > 0.0))
    throw InvalidConfigError("grid size and spacing must be positive");
  s.tof = make_tof_spec(cfg.get_double_or("tof.fwhm_ps", 200.0),
                        static_cast<int>(cfg.get_int_or("tof.bins", 17)),
                        cfg.get_double_or("tof.bin_width_mm", 15.0));
  s.min_angle = cfg.get_double_or("lor.min_angle_deg", 90.0);
  s.threads = static_cast<int>(cfg.get_int_or("threads", 0));
  return s;
}

void stash_setup(RunConfig& out, const Setup& s) {
  out.set("scanner.modules", std::to_string(s.scanner.n_modules));
  out.set("scanner.crystals_per_module",
          std::to_string(s.scanner.crystals_per_module));
  std::ostringstream radius, width, spacing, fwhm, binw, angle;
  radius << std::setprecision(17) << s.scanner.ring_radius;
  width << std::setprecision(17) << s.scanner.crystal_width;
  spacing << std::setprecision(17) << s.grid.spacing;
  fwhm << std::setprecision(17) << s.tof.fwhm_ps;
  binw << std::setprecision(17) << s.tof.bin_width;
  angle << std::setprecision(17) << s.min_angle;
  out.set("scanner.radius_mm", radius.str());
  out.set("scanner.crystal_width_mm", width.str());
  out.set("grid.width", std::to_string(s.grid.width));
  out.set("grid.height", std::to_string(s.grid.height));
  out.set("grid.spacing_mm", spacing.str());
  out.set("tof.fwhm_ps", fwhm.str());
  out.set("tof.bins", std::to_string(s.tof.n_bins));
  out.set("tof.bin_width_mm", binw.str());
  out.set("lor.min_angle_deg", angle.str());
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t a = item.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    std::size_t b = item.find_last_not_of(" \t");
    out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  for (const std::string& item : split_list(s)) {
    try {
      std::size_t pos = 0;
      int v = std::stoi(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InvalidConfigError("bad integer '" + item + "' in " + key);
    }
  }
  if (out.empty()) throw InvalidConfigError("empty list for " + key);
  return out;
}

bool has_network_keys(const RunConfig& cfg) {
  return cfg.has("train.phases") || cfg.has("train.hidden") ||
         cfg.has("train.channels") || cfg.has("train.kernel") ||
         cfg.has("train.shared");
}

NetworkConfig network_from_config(const RunConfig& cfg) {
  NetworkConfig net;
  net.n_phases = static_cast<int>(cfg.get_int_or("train.phases", net.n_phases));
  if (cfg.has("train.hidden"))
    net.dual_hidden = parse_int_list(cfg.get("train.hidden"), "train.hidden");
  if (cfg.has("train.channels"))
    net.primal_channels =
        parse_int_list(cfg.get("train.channels"), "train.channels");
  net.kernel = static_cast<int>(cfg.get_int_or("train.kernel", net.kernel));
  net.shared_weights =
      cfg.get_int_or("train.shared", net.shared_weights ? 1 : 0) != 0;
  net.validate();
  return net;
}

double peak_rss_mb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return static_cast<double>(usage.ru_maxrss) / 1024.0;  // kB on Linux
}

}  // namespace

void run_simulate(const RunConfig& cfg, const std::string& out_dir) {
  Setup setup = make_setup(cfg);
  SimConfig sim;
  sim.target_counts = cfg.get_double("sim.counts");
  sim.contamination_fraction = cfg.get_double_or("sim.contamination", 0.20);
  sim.psf_fwhm = cfg.get_double_or("sim.psf_fwhm_mm", 4.0);
  sim.seed = cfg.get_u64_or("seed", 1);
  PhantomKind kind = phantom_kind_from_string(cfg.get("sim.phantom"));

  Phantom phantom = make_phantom(kind, sim.seed, setup.grid);
  LorTable table = enumerate_fan_lors(setup.scanner, setup.min_angle);
  ProjectionContext ctx = setup.context();
  SimResult result = sample_listmode(phantom, sim, ctx, table);
  std::uint64_t gh = setup.hash();

  fs::create_directories(out_dir);
  write_lmev(join_path(out_dir, "events.lmev"), result.events, gh,
             static_cast<std::uint16_t>(setup.tof.n_bins));
  write_img(join_path(out_dir, "truth.img"), phantom.activity);
  write_img(join_path(out_dir, "atten.img"), phantom.attenuation);
  write_pgm16(join_path(out_dir, "truth.pgm"), phantom.activity);
  write_rois(join_path(out_dir, "rois.json"), phantom.rois);

  RunConfig meta;
  stash_setup(meta, setup);
  meta.set("sim.phantom", cfg.get("sim.phantom"));
  meta.set("sim.counts", fmt(sim.target_counts));
  meta.set("sim.contamination", fmt(sim.contamination_fraction));
  meta.set("sim.psf_fwhm_mm", fmt(sim.psf_fwhm));
  meta.set("seed", std::to_string(sim.seed));
  meta.set("geometry.hash", std::to_string(gh));
  meta.set("sim.scale", fmt(result.scale));
  meta.set("sim.contamination_mean", fmt(result.contamination_mean));
  meta.set("sim.expected_total", fmt(result.expected_total));
  meta.set("sim.total_bins", std::to_string(result.total_bins));
  meta.set("sim.n_events", std::to_string(result.events.size()));
  meta.set("files.attenuation", "atten.img");
  write_text_file(join_path(out_dir, "events.meta"), meta.to_text());
}

void run_recon(const RunConfig& cfg, const std::string& out_dir) {
  std::string events_path = cfg.get("recon.events");
  fs::path meta_path = fs::path(events_path);
  meta_path.replace_extension(".meta");

  Setup setup;
  double contamination = 0.0;
  double scale = 1.0;
  std::string atten_path;
  if (fs::exists(meta_path)) {
    RunConfig meta = RunConfig::load(meta_path.string());
    setup = make_setup(meta);
    setup.threads = static_cast<int>(cfg.get_int_or("threads", 0));
    contamination = meta.get_double_or("sim.contamination_mean", 0.0);
    scale = meta.get_double_or("sim.scale", 1.0);
    if (meta.has("files.attenuation"))
      atten_path = (fs::path(events_path).parent_path() /
                    meta.get("files.attenuation"))
                       .string();
  } else {
    setup = make_setup(cfg);
  }
  if (cfg.has("recon.contamination_mean"))
    contamination = cfg.get_double("recon.contamination_mean");

  LmevData data = read_lmev(events_path);
  if (data.geom_hash != setup.hash())
    throw HashMismatchError(
        "event file " + events_path +
        " was produced with different scanner/TOF/grid settings");

  ProjectionContext ctx = setup.context();
  LorTable table = enumerate_fan_lors(setup.scanner, setup.min_angle);
  auto n_bins = static_cast<std::size_t>(setup.tof.n_bins);
  std::vector<double> per_lor(table.pairs.size(), scale);
  if (!atten_path.empty()) {
    Image2D atten = read_img(atten_path);
    std::vector<double> factors = attenuation_factors(atten, ctx, table);
    for (std::size_t l = 0; l < per_lor.size(); ++l)
      per_lor[l] = factors[l] * scale;
  }
  std::vector<double> multipliers(table.pairs.size() * n_bins);
  for (std::size_t l = 0; l < table.pairs.size(); ++l)
    for (std::size_t b = 0; b < n_bins; ++b)
      multipliers[bin_index(l, setup.tof.n_bins, static_cast<int>(b))] =
          per_lor[l];
  ReconContext rctx{ctx, sensitivity_image(ctx, table, multipliers),
                    table.pairs.size() * n_bins};

  Algorithm alg = algorithm_from_string(cfg.get("recon.algorithm"));
  ReconConfig rc;
  rc.algorithm = alg;
  rc.n_iterations = static_cast<int>(cfg.get_int_or("recon.iterations", 10));
  rc.n_subsets = static_cast<int>(cfg.get_int_or("recon.subsets", 1));
  double default_beta = alg == Algorithm::emtv     ? 2.0
                        : alg == Algorithm::spdhgtv ? 0.20
                                                    : 0.0;
  rc.beta = cfg.get_double_or("recon.beta", default_beta);
  rc.gamma = cfg.get_double_or("recon.gamma", 5.0);
  rc.rho = cfg.get_double_or("recon.rho", 0.999);
  rc.epsilon_floor = cfg.get_double_or("recon.epsilon", 1e-12);
  rc.contamination_mean = contamination;
  rc.seed = cfg.get_u64_or("seed", 1);
  rc.record_objective = false;  // the CSV below evaluates per epoch already

  bool have_truth = cfg.has("recon.truth");
  Image2D truth;
  if (have_truth) {
    truth = read_img(cfg.get("recon.truth"));
    if (!(truth.grid() == setup.grid))
      throw DimensionError("truth image grid does not match the run grid");
  }

  std::vector<std::string> header{"iteration", "neg_loglik", "objective"};
  if (have_truth) {
    header.push_back("psnr_db");
    header.push_back("ssim");
  }
  CsvWriter csv(header);
  auto emit = [&](int it, const Image2D& img) {
    double nll = std::numeric_limits<double>::quiet_NaN();
    double obj = nll;
    try {
      nll = -poisson_loglik(img, data.events, rctx, contamination);
      obj = nll + effective_tv_weight(alg, rc.beta, rctx) * tv_value(img);
    } catch (const NumericError&) {
    }
    std::vector<std::string> row{std::to_string(it), fmt(nll), fmt(obj)};
    if (have_truth) {
      row.push_back(fmt(psnr(img, truth)));
      row.push_back(fmt(ssim(img, truth)));
    }
    csv.row(row);
  };

  Image2D out_img(setup.grid);
  if (alg == Algorithm::lmpd) {
    if (!cfg.has("recon.checkpoint"))
      throw InvalidConfigError(
          "missing key: recon.checkpoint (lmpd needs a trained network)");
    TrainState state = load_checkpoint(cfg.get("recon.checkpoint"));
    if (has_network_keys(cfg) &&
        network_from_config(cfg).hash() != state.best.cfg.hash())
      throw HashMismatchError("checkpoint " + cfg.get("recon.checkpoint") +
                              " holds a different architecture than the config");
    std::vector<Image2D> per_phase;
    LmpdOptions opt;  // eval mode
    out_img = lmpd_forward(state.best, data.events, ctx, opt, nullptr,
                           &per_phase);
    for (std::size_t k = 0; k < per_phase.size(); ++k)
      emit(static_cast<int>(k + 1), per_phase[k]);
  } else {
    Image2D init = uniform_init(rctx, data.events.size());
    IterateCallback cb = emit;
    ReconResult res;
    switch (alg) {
      case Algorithm::mlem:
        res = lm_mlem(data.events, init, rc, rctx, cb);
        break;
      case Algorithm::osem:
        res = lm_osem(data.events, init, rc, rctx, cb);
        break;
      case Algorithm::emtv:
        res = lm_em_tv(data.events, init, rc, rctx, cb);
        break;
      case Algorithm::spdhg:
        res = lm_spdhg(data.events, init, rc, rctx, cb);
        break;
      case Algorithm::spdhgtv:
        res = lm_spdhg_tv(data.events, init, rc, rctx, cb);
        break;
      default:
        throw InvalidConfigError("unhandled algorithm");
    }
    out_img = res.image;
  }

  fs::create_directories(out_dir);
  std::string stem = "recon_" + algorithm_name(alg);
  write_img(join_path(out_dir, stem + ".img"), out_img);
  if (cfg.get_int_or("recon.save_preview", 1) != 0)
    write_pgm16(join_path(out_dir, stem + ".pgm"), out_img);
  csv.save(join_path(out_dir, stem + ".csv"));
}

void run_train(const RunConfig& cfg, const std::string& out_dir) {
  Setup setup = make_setup(cfg);
  std::string dataset = cfg.get("train.dataset");
  std::vector<fs::path> files;
  if (fs::is_directory(dataset))
    for (const auto& entry : fs::directory_iterator(dataset))
      if (entry.path().extension() == ".lmev") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw InvalidConfigError("dataset directory has no .lmev files: " +
                             dataset);

  std::uint64_t gh = setup.hash();
  std::vector<TrainSample> all;
  for (const fs::path& p : files) {
    LmevData d = read_lmev(p.string());
    if (d.geom_hash != gh)
      throw HashMismatchError("geometry hash mismatch in " + p.string());
    fs::path truth_p = p;
    truth_p.replace_extension(".img");
    if (!fs::exists(truth_p))
      throw IoError("missing truth image for " + p.string());
    Image2D truth = read_img(truth_p.string());
    if (!(truth.grid() == setup.grid))
      throw DimensionError("truth image grid mismatch in " + truth_p.string());
    all.push_back({std::move(d.events), std::move(truth)});
  }

  auto n = static_cast<std::int64_t>(all.size());
  std::int64_t val_count =
      cfg.get_int_or("train.val_count", std::max<std::int64_t>(1, n / 5));
  if (val_count < 1 || val_count >= n)
    throw InvalidConfigError(
        "train.val_count must leave at least one training pair");
  std::vector<TrainSample> train_set(
      std::make_move_iterator(all.begin()),
      std::make_move_iterator(all.end() - val_count));
  std::vector<TrainSample> val_set(
      std::make_move_iterator(all.end() - val_count),
      std::make_move_iterator(all.end()));

  NetworkConfig net = network_from_config(cfg);
  TrainConfig tc;
  tc.epochs = static_cast<int>(cfg.get_int_or("train.epochs", 200));
  tc.lr = cfg.get_double_or("train.lr", 1e-3);
  tc.seed = cfg.get_u64_or("seed", 1);

  TrainState state;
  if (cfg.has("train.resume")) {
    state = load_checkpoint(cfg.get("train.resume"));
    if (state.params.cfg.hash() != net.hash())
      throw HashMismatchError("checkpoint " + cfg.get("train.resume") +
                              " holds a different architecture than the config");
  } else {
    state.params = init_network(net, tc.seed);
  }

  ProjectionContext ctx = setup.context();
  int start_epoch = state.next_epoch;
  TrainResult result = train_toy(train_set, val_set, state, tc, ctx);

  fs::create_directories(out_dir);
  save_checkpoint(join_path(out_dir, "checkpoint.lmpd"), state, true);
  CsvWriter csv({"epoch", "train_mse", "val_mse"});
  for (std::size_t i = 0; i < result.train_loss.size(); ++i)
    csv.row({std::to_string(start_epoch + static_cast<int>(i) + 1),
             fmt(result.train_loss[i]), fmt(result.val_loss[i])});
  csv.save(join_path(out_dir, "loss.csv"));

  RunConfig summary;
  summary.set("train.initial_val", fmt(result.initial_val));
  summary.set("train.best_val", fmt(state.best_val));
  summary.set("train.best_epoch", std::to_string(state.best_epoch));
  summary.set("train.epochs_done", std::to_string(state.next_epoch));
  summary.set("train.diverged", result.diverged ? "1" : "0");
  write_text_file(join_path(out_dir, "train.meta"), summary.to_text());

  if (result.diverged)
    throw NumericError(
        "training loss became non-finite; checkpoint keeps the last good "
        "state");
}

void run_eval(const RunConfig& cfg, const std::string& out_dir) {
  Image2D truth = read_img(cfg.get("eval.truth"));
  RoiSpec rois = read_rois(cfg.get("eval.rois"));
  std::vector<std::string> paths = split_list(cfg.get("eval.recons"));
  if (paths.empty()) throw InvalidConfigError("eval.recons lists no images");

  std::vector<Image2D> recons;
  for (const std::string& p : paths) {
    Image2D img = read_img(p);
    if (!(img.grid() == truth.grid()))
      throw DimensionError("image grid mismatch in " + p);
    recons.push_back(std::move(img));
  }

  auto union_of = [](const std::vector<std::vector<int>>& masks) {
    std::vector<int> u;
    for (const auto& m : masks) u.insert(u.end(), m.begin(), m.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
  };
  std::vector<int> target_union = union_of(rois.targets);
  std::vector<int> bg_union = union_of(rois.background);

  CsvWriter per_image({"image", "psnr_db", "ssim", "cnr"});
  for (std::size_t i = 0; i < recons.size(); ++i) {
    double c = std::numeric_limits<double>::quiet_NaN();
    try {
      c = cnr(recons[i], target_union, bg_union);
    } catch (const Error&) {
    }
    per_image.row({fs::path(paths[i]).filename().string(),
                   fmt(psnr(recons[i], truth)), fmt(ssim(recons[i], truth)),
                   fmt(c)});
  }

  double crc_v = std::numeric_limits<double>::quiet_NaN();
  double std_v = crc_v, bias_v = crc_v;
  try {
    crc_v = crc(recons, rois);
  } catch (const Error&) {
  }
  try {
    std_v = background_std(recons, rois);
  } catch (const Error&) {
  }
  try {
    bias_v = bias(recons, rois, rois.a_true);
  } catch (const Error&) {
  }
  CsvWriter summary({"n_realizations", "crc", "background_std", "bias"});
  summary.row({std::to_string(recons.size()), fmt(crc_v), fmt(std_v),
               fmt(bias_v)});

  fs::create_directories(out_dir);
  per_image.save(join_path(out_dir, "metrics.csv"));
  summary.save(join_path(out_dir, "summary.csv"));
}

void run_bench(const RunConfig& cfg, const std::string& out_dir) {
  Setup setup = make_setup(cfg);
  auto n_events =
      static_cast<std::size_t>(cfg.get_int_or("bench.events", 100000));
  int repeats = static_cast<int>(cfg.get_int_or("bench.repeats", 3));
  if (n_events < 1 || repeats < 1)
    throw InvalidConfigError("bench.events and bench.repeats must be >= 1");
  std::vector<int> thread_list =
      parse_int_list(cfg.get_or("bench.threads", "1,2,4,8"), "bench.threads");
  std::uint64_t seed = cfg.get_u64_or("seed", 1);

  LorTable table = enumerate_fan_lors(setup.scanner, setup.min_angle);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pair_draw(0,
                                                       table.pairs.size() - 1);
  std::uniform_int_distribution<int> bin_draw(0, setup.tof.n_bins - 1);
  EventList events(n_events);
  for (Event& e : events) {
    auto [a, b] = table.pairs[pair_draw(rng)];
    e.det_a = a;
    e.det_b = b;
    e.tof_bin = static_cast<std::uint16_t>(bin_draw(rng));
    e.multiplier = 1.0f;
  }
  Image2D img = make_phantom(PhantomKind::ellipse_brain, seed, setup.grid)
                    .activity;

  std::string grid_label =
      std::to_string(setup.grid.width) + "x" + std::to_string(setup.grid.height);
  CsvWriter csv({"op", "n_events", "grid", "threads", "repeats", "best_ms",
                 "events_per_s", "peak_rss_mb"});
  auto time_best = [&](auto&& body) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < repeats; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      body();
      auto t1 = std::chrono::steady_clock::now();
      best = std::min(best,
                      std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
  };
  for (int t : thread_list) {
    ProjectionContext ctx{setup.scanner, setup.grid, setup.tof, t};
    std::vector<double> proj;
    double fwd_ms = time_best([&] { proj = forward_project(img, events, ctx); });
    double back_ms =
        time_best([&] { (void)back_project(proj, events, ctx); });
    auto emit = [&](const char* op, double ms) {
      csv.row({op, std::to_string(n_events), grid_label, std::to_string(t),
               std::to_string(repeats), fmt(ms),
               fmt(static_cast<double>(n_events) / (ms / 1000.0)),
               fmt(peak_rss_mb())});
    };
    emit("forward", fwd_ms);
    emit("back", back_ms);
  }

  fs::create_directories(out_dir);
  csv.save(join_path(out_dir, "bench.csv"));
  std::cout << csv.text();
}

}  // namespace listrecon
