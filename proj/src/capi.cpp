#include "listrecon.h"

#include <cstring>
#include <string>

#include "listrecon/config.hpp"
#include "listrecon/errors.hpp"
#include "listrecon/image.hpp"
#include "listrecon/io.hpp"
#include "listrecon/runner.hpp"

struct lr_config {
  listrecon::RunConfig cfg;
};

struct lr_image {
  listrecon::Image2D img;
};

namespace {

thread_local std::string g_last_error = "no error";

template <class F>
lr_status guarded(F&& body) {
  try {
    body();
    return LR_OK;
  } catch (const listrecon::Error& e) {
    g_last_error = e.what();
    return static_cast<lr_status>(static_cast<int>(e.code()));
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LR_ERROR;
  } catch (...) {
    g_last_error = "unknown error";
    return LR_ERROR;
  }
}

lr_status null_arg(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return LR_ERROR;
}

}  // namespace

extern "C" {

const char* lr_version(void) { return "0.1.0"; }

const char* lr_last_error(void) { return g_last_error.c_str(); }

lr_status lr_config_create(lr_config** out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = new lr_config{}; });
}

lr_status lr_config_load(const char* path, lr_config** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded(
      [&] { *out = new lr_config{listrecon::RunConfig::load(path)}; });
}

lr_status lr_config_parse(const char* text, lr_config** out) {
  if (!text) return null_arg("text");
  if (!out) return null_arg("out");
  return guarded(
      [&] { *out = new lr_config{listrecon::RunConfig::parse(text)}; });
}

lr_status lr_config_set(lr_config* cfg, const char* key, const char* value) {
  if (!cfg) return null_arg("cfg");
  if (!key) return null_arg("key");
  if (!value) return null_arg("value");
  return guarded([&] { cfg->cfg.set(key, value); });
}

lr_status lr_config_get(const lr_config* cfg, const char* key, char* buf,
                        size_t buflen) {
  if (!cfg) return null_arg("cfg");
  if (!key) return null_arg("key");
  if (!buf || buflen == 0) return null_arg("buf");
  return guarded([&] {
    const std::string& v = cfg->cfg.get(key);
    std::size_t n = std::min(buflen - 1, v.size());
    std::memcpy(buf, v.data(), n);
    buf[n] = '\0';
  });
}

void lr_config_destroy(lr_config* cfg) { delete cfg; }

lr_status lr_image_create(int32_t width, int32_t height, double spacing_mm,
                          lr_image** out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new lr_image{
        listrecon::Image2D(listrecon::GridSpec{width, height, spacing_mm})};
  });
}

lr_status lr_image_load(const char* path, lr_image** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new lr_image{listrecon::read_img(path)}; });
}

lr_status lr_image_save(const lr_image* img, const char* path) {
  if (!img) return null_arg("img");
  if (!path) return null_arg("path");
  return guarded([&] { listrecon::write_img(path, img->img); });
}

lr_status lr_image_shape(const lr_image* img, int32_t* width, int32_t* height,
                         double* spacing_mm) {
  if (!img) return null_arg("img");
  if (width) *width = img->img.width();
  if (height) *height = img->img.height();
  if (spacing_mm) *spacing_mm = img->img.grid().spacing;
  return LR_OK;
}

lr_status lr_image_data(lr_image* img, double** out) {
  if (!img) return null_arg("img");
  if (!out) return null_arg("out");
  *out = img->img.data();
  return LR_OK;
}

void lr_image_destroy(lr_image* img) { delete img; }

lr_status lr_run_simulate(const lr_config* cfg, const char* out_dir) {
  if (!cfg) return null_arg("cfg");
  if (!out_dir) return null_arg("out_dir");
  return guarded([&] { listrecon::run_simulate(cfg->cfg, out_dir); });
}

lr_status lr_run_recon(const lr_config* cfg, const char* out_dir) {
  if (!cfg) return null_arg("cfg");
  if (!out_dir) return null_arg("out_dir");
  return guarded([&] { listrecon::run_recon(cfg->cfg, out_dir); });
}

lr_status lr_run_train(const lr_config* cfg, const char* out_dir) {
  if (!cfg) return null_arg("cfg");
  if (!out_dir) return null_arg("out_dir");
  return guarded([&] { listrecon::run_train(cfg->cfg, out_dir); });
}

lr_status lr_run_eval(const lr_config* cfg, const char* out_dir) {
  if (!cfg) return null_arg("cfg");
  if (!out_dir) return null_arg("out_dir");
  return guarded([&] { listrecon::run_eval(cfg->cfg, out_dir); });
}

lr_status lr_run_bench(const lr_config* cfg, const char* out_dir) {
  if (!cfg) return null_arg("cfg");
  if (!out_dir) return null_arg("out_dir");
  return guarded([&] { listrecon::run_bench(cfg->cfg, out_dir); });
}

}  // extern "C"
