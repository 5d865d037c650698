#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "listrecon.h"

namespace {

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool has_seed = false;
  int threads = -1;
};

void attach(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config_path, "run configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opt.out_dir, "output directory");
  cmd->add_option("--seed", opt.seed, "override the config seed")
      ->each([&opt](const std::string&) { opt.has_seed = true; });
  cmd->add_option("--threads", opt.threads,
                  "worker threads (0 = LISTRECON_THREADS or all cores)");
}

int run_stage(lr_status (*stage)(const lr_config*, const char*),
              const Options& opt) {
  lr_config* cfg = nullptr;
  lr_status st = opt.config_path.empty()
                     ? lr_config_create(&cfg)
                     : lr_config_load(opt.config_path.c_str(), &cfg);
  if (st == LR_OK && opt.has_seed)
    st = lr_config_set(cfg, "seed", std::to_string(opt.seed).c_str());
  if (st == LR_OK && opt.threads >= 0)
    st = lr_config_set(cfg, "threads", std::to_string(opt.threads).c_str());
  if (st == LR_OK) st = stage(cfg, opt.out_dir.c_str());
  if (st != LR_OK) std::fprintf(stderr, "error: %s\n", lr_last_error());
  lr_config_destroy(cfg);
  return static_cast<int>(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TOF list-mode PET reconstruction toolkit"};
  app.set_version_flag("--version", lr_version());
  app.require_subcommand(1);

  Options opt;
  CLI::App* simulate =
      app.add_subcommand("simulate", "sample a list-mode acquisition");
  CLI::App* recon = app.add_subcommand("recon", "reconstruct an event file");
  CLI::App* train = app.add_subcommand("train", "train the unrolled network");
  CLI::App* eval = app.add_subcommand("eval", "score reconstructions");
  CLI::App* bench = app.add_subcommand("bench", "time the projector");
  for (CLI::App* cmd : {simulate, recon, train, eval, bench}) attach(cmd, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(LR_BAD_CONFIG);
  }

  if (simulate->parsed()) return run_stage(lr_run_simulate, opt);
  if (recon->parsed()) return run_stage(lr_run_recon, opt);
  if (train->parsed()) return run_stage(lr_run_train, opt);
  if (eval->parsed()) return run_stage(lr_run_eval, opt);
  return run_stage(lr_run_bench, opt);
}
