#pragma once

#include <string>

#include "listrecon/config.hpp"

namespace listrecon {

/// Pipeline stages behind the CLI subcommands.  Each reads its inputs from
/// the config (see README for the key tables), writes its artifacts into
/// out_dir, and reports failures through the usual exception taxonomy.
void run_simulate(const RunConfig& cfg, const std::string& out_dir);
void run_recon(const RunConfig& cfg, const std::string& out_dir);
void run_train(const RunConfig& cfg, const std::string& out_dir);
void run_eval(const RunConfig& cfg, const std::string& out_dir);
void run_bench(const RunConfig& cfg, const std::string& out_dir);

}  // namespace listrecon
