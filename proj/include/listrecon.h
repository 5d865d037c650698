#ifndef LISTRECON_H
#define LISTRECON_H

/* C interface to the list-mode reconstruction toolkit.  All entry points
 * return lr_status; on failure lr_last_error() describes what went wrong
 * (per thread).  Handles are opaque and freed with their _destroy call. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lr_status {
  LR_OK = 0,
  LR_ERROR = 1,
  LR_BAD_CONFIG = 2,
  LR_IO_ERROR = 3,
  LR_HASH_MISMATCH = 4,
  LR_BAD_DIMENSION = 5,
  LR_EMPTY_DATA = 6,
  LR_NUMERIC_ERROR = 7
} lr_status;

typedef struct lr_config lr_config;
typedef struct lr_image lr_image;

const char* lr_version(void);

/* Message of the most recent failure on this thread; never NULL. */
const char* lr_last_error(void);

/* --- configuration (key = value text) ---------------------------------- */
lr_status lr_config_create(lr_config** out);
lr_status lr_config_load(const char* path, lr_config** out);
lr_status lr_config_parse(const char* text, lr_config** out);
lr_status lr_config_set(lr_config* cfg, const char* key, const char* value);
/* Copies the value into buf (NUL-terminated, truncating if needed). */
lr_status lr_config_get(const lr_config* cfg, const char* key, char* buf,
                        size_t buflen);
void lr_config_destroy(lr_config* cfg);

/* --- images ------------------------------------------------------------- */
lr_status lr_image_create(int32_t width, int32_t height, double spacing_mm,
                          lr_image** out);
lr_status lr_image_load(const char* path, lr_image** out);
lr_status lr_image_save(const lr_image* img, const char* path);
lr_status lr_image_shape(const lr_image* img, int32_t* width, int32_t* height,
                         double* spacing_mm);
/* Mutable row-major pixel buffer, valid until destroy. */
lr_status lr_image_data(lr_image* img, double** out);
void lr_image_destroy(lr_image* img);

/* --- pipeline stages ----------------------------------------------------
 * Each consumes the config keys documented in the README and writes its
 * artifacts into out_dir. */
lr_status lr_run_simulate(const lr_config* cfg, const char* out_dir);
lr_status lr_run_recon(const lr_config* cfg, const char* out_dir);
lr_status lr_run_train(const lr_config* cfg, const char* out_dir);
lr_status lr_run_eval(const lr_config* cfg, const char* out_dir);
lr_status lr_run_bench(const lr_config* cfg, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* LISTRECON_H */
