/* C interface to the reef survey pipeline. All functions returning
 * reef_status leave a message retrievable with reef_last_error() on failure. */
#ifndef REEF_REEF_H
#define REEF_REEF_H

#include <stddef.h>

#if defined(_WIN32)
#define REEF_API __declspec(dllexport)
#elif defined(REEF_BUILDING_LIBRARY)
#define REEF_API __attribute__((visibility("default")))
#else
#define REEF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum reef_status {
  REEF_OK = 0,
  REEF_ERR_IO = 2,
  REEF_ERR_VALIDATION = 3,
  REEF_ERR_INTERNAL = 4,
  REEF_ERR_INSUFFICIENT_DATA = 5,
  REEF_ERR_INVALID_ARGUMENT = 6
} reef_status;

typedef enum reef_camera { REEF_LEFT = 0, REEF_RIGHT = 1 } reef_camera;

typedef struct reef_context reef_context;
typedef struct reef_rig reef_rig;

REEF_API const char* reef_version(void);
REEF_API const char* reef_status_name(reef_status status);

REEF_API reef_status reef_context_create(reef_context** out);
REEF_API void reef_context_destroy(reef_context* ctx);
/* Message of the last failed call on this context; "" when none. */
REEF_API const char* reef_last_error(const reef_context* ctx);
/* Progress lines on stderr (off by default). */
REEF_API void reef_set_logging(reef_context* ctx, int enabled);

/* Configuration: a JSON document plus key=value overrides. Relative paths in
 * a file resolve against the file's directory. */
REEF_API reef_status reef_load_config_file(reef_context* ctx, const char* path);
REEF_API reef_status reef_load_config_string(reef_context* ctx, const char* json,
                                             const char* base_dir);
REEF_API reef_status reef_set_option(reef_context* ctx, const char* key_value);
/* Copies the effective configuration JSON into buf (NUL-terminated when it
 * fits). *needed receives the full size including the terminator. */
REEF_API reef_status reef_config_json(reef_context* ctx, char* buf, size_t capacity,
                                      size_t* needed);

/* Full pipeline over the configured manifests. */
REEF_API reef_status reef_run_pipeline(reef_context* ctx, size_t* n_clips);

/* Stage entry points working on intermediate files. */
REEF_API reef_status reef_track(reef_context* ctx, const char* manifest_path,
                                const char* out_dir);
REEF_API reef_status reef_match3d(reef_context* ctx, const char* clip_id,
                                  const char* tracks_left, const char* tracks_right,
                                  const char* out_dir, size_t* n_individuals);
/* points_csv may be NULL (no distances, no volume). */
REEF_API reef_status reef_summarize(reef_context* ctx, const char* clip_id,
                                    const char* individuals_csv, const char* points_csv,
                                    const char* out_dir);
REEF_API reef_status reef_volume(reef_context* ctx, const char* points_csv,
                                 double* volume_m3, size_t* n_used, size_t* n_removed);
REEF_API reef_status reef_eval_detections(reef_context* ctx, const char* predictions,
                                          const char* ground_truth, int image_width,
                                          int image_height, const char* report_csv,
                                          double* map50, double* map50_95);
REEF_API reef_status reef_eval_tracks(reef_context* ctx, const char* predicted_tracks,
                                      const char* gt_tracks, const char* report_csv,
                                      double* mota, double* idf1, double* hota);
/* scene_json may be NULL for the default scene. Writes n_clips clips with
 * consecutive seeds and a pipeline.json that runs them. */
REEF_API reef_status reef_simulate(reef_context* ctx, const char* scene_json, int n_clips,
                                   const char* out_dir);

/* Calibrated rig for point-level geometry. Pixels are raw (distorted). */
REEF_API reef_status reef_rig_load(reef_context* ctx, const char* calibration_path,
                                   reef_rig** out);
REEF_API void reef_rig_destroy(reef_rig* rig);
REEF_API reef_status reef_rig_project(reef_context* ctx, const reef_rig* rig,
                                      const double xyz[3], reef_camera camera,
                                      double pixel[2]);
REEF_API reef_status reef_rig_triangulate(reef_context* ctx, const reef_rig* rig,
                                          const double left_pixel[2],
                                          const double right_pixel[2], double xyz[3]);

#ifdef __cplusplus
}
#endif

#endif
