/* C interface to the windowloss library. All functions report failure via a
 * wlk_status code; the message of the most recent failure on the calling
 * thread is available from wlk_last_error(). Handles are opaque and owned by
 * the caller until passed to the matching *_free function. */
#ifndef WLK_WLK_H
#define WLK_WLK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  ifdef WLK_BUILDING_LIBRARY
#    define WLK_API __declspec(dllexport)
#  else
#    define WLK_API __declspec(dllimport)
#  endif
#else
#  define WLK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define WLK_ABI_VERSION 1

typedef enum wlk_status {
  WLK_OK = 0,
  WLK_ERROR_INTERNAL = 1,
  WLK_ERROR_USAGE = 2,
  WLK_ERROR_DATA = 3,
  WLK_ERROR_NUMERIC = 4
} wlk_status;

typedef enum wlk_divergence { WLK_MSE = 0, WLK_KLD = 1 } wlk_divergence;

typedef struct wlk_bound_params {
  double r_lower;
  double r_upper;
  double tau;
  double disk_radius;
} wlk_bound_params;

typedef struct wlk_summary {
  double auroc;
  double froc_score;
  double recall_at_01;
} wlk_summary;

typedef struct wlk_config wlk_config;
typedef struct wlk_dataset wlk_dataset;
typedef struct wlk_model wlk_model;

WLK_API int wlk_abi_version(void);

/* Message of the last failure on this thread; "" when none. */
WLK_API const char* wlk_last_error(void);

WLK_API wlk_bound_params wlk_default_bound_params(void);

/* Bounds on a rows x cols grid whose cells span `scale` input pixels.
 * `xy` holds n (x, y) pairs in input space; n may be 0. */
WLK_API wlk_status wlk_make_bounds(const double* xy, size_t n, size_t rows, size_t cols, double scale,
                                   const wlk_bound_params* params, double* lower, double* upper);

WLK_API wlk_status wlk_disk_mask(const double* xy, size_t n, size_t rows, size_t cols, double scale,
                                 double radius, double* mask);

/* Mean Window Loss over n pixels. `grad` may be NULL. */
WLK_API wlk_status wlk_window_loss(const double* pred, const double* lower, const double* upper, size_t n,
                                   wlk_divergence kind, double* loss, double* grad);

WLK_API wlk_status wlk_auroc(const double* scores, const int* labels, size_t n, double* out);

WLK_API wlk_status wlk_dataset_load(const char* manifest_path, wlk_dataset** out);
WLK_API void wlk_dataset_free(wlk_dataset* dataset);
WLK_API size_t wlk_dataset_size(const wlk_dataset* dataset);
WLK_API uint32_t wlk_dataset_input_size(const wlk_dataset* dataset);
/* Number of annotation points of record `index`, or (size_t)-1 if out of range. */
WLK_API size_t wlk_dataset_point_count(const wlk_dataset* dataset, size_t index);
/* Writes point_count (x, y) pairs in input space into `xy`. */
WLK_API wlk_status wlk_dataset_points_input_space(const wlk_dataset* dataset, size_t index, double* xy);

WLK_API wlk_status wlk_model_load(const char* checkpoint_path, wlk_model** out);
WLK_API void wlk_model_free(wlk_model* model);
WLK_API uint32_t wlk_model_input_size(const wlk_model* model);
/* Side length of the merged probability map. */
WLK_API uint32_t wlk_model_output_size(const wlk_model* model);
/* `image` is input_size^2 row-major intensities in [0, 1]; `out` receives
 * output_size^2 probabilities. */
WLK_API wlk_status wlk_model_predict(const wlk_model* model, const double* image, double* out);

/* Scores the maps under heatmap_dir for the given split of the manifest. */
WLK_API wlk_status wlk_evaluate(const char* manifest_path, const char* heatmap_dir, const char* split,
                                const wlk_bound_params* params, wlk_summary* out);

WLK_API wlk_status wlk_config_create(wlk_config** out);
WLK_API void wlk_config_free(wlk_config* config);
WLK_API wlk_status wlk_config_load_file(wlk_config* config, const char* path);
WLK_API wlk_status wlk_config_set(wlk_config* config, const char* key, const char* value);
/* Copies the resolved JSON into buf (NUL-terminated) and stores the required
 * size including the terminator in *needed. buf may be NULL when cap is 0. */
WLK_API wlk_status wlk_config_to_json(const wlk_config* config, char* buf, size_t cap, size_t* needed);

WLK_API size_t wlk_config_key_count(void);
WLK_API const char* wlk_config_key_name(size_t index);
WLK_API const char* wlk_config_key_default(size_t index);
WLK_API const char* wlk_config_key_doc(size_t index);

WLK_API size_t wlk_command_count(void);
WLK_API const char* wlk_command_name(size_t index);

/* Runs a CLI command ("synth", "train", ...) with the given configuration. */
WLK_API wlk_status wlk_run(const char* command, const wlk_config* config);

#ifdef __cplusplus
}
#endif

#endif
