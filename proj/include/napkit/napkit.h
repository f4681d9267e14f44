#ifndef NAPKIT_H
#define NAPKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(NAPKIT_BUILDING_LIBRARY)
#define NAPKIT_API __attribute__((visibility("default")))
#else
#define NAPKIT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum napkit_status {
  NAPKIT_OK = 0,
  NAPKIT_ERR_INTERNAL = 1,
  NAPKIT_ERR_CONFIG = 2,
  NAPKIT_ERR_DATA = 3,
  NAPKIT_ERR_CAPABILITY = 4,
  NAPKIT_ERR_PRECONDITION = 5
} napkit_status;

typedef struct napkit_camera napkit_camera;
typedef struct napkit_detector napkit_detector;

typedef struct napkit_camera_params {
  double fx, fy, cx, cy, skew;
  double k1, k2, k3, p1, p2;
  int32_t width, height;
} napkit_camera_params;

/* Interleaved 8-bit RGB, row stride = width * 3. */
typedef struct napkit_image_view {
  const uint8_t* data;
  int32_t width;
  int32_t height;
} napkit_image_view;

NAPKIT_API const char* napkit_version(void);

/* Message and error kind of the last failure on the calling thread. */
NAPKIT_API const char* napkit_last_error(void);
NAPKIT_API const char* napkit_last_error_kind(void);

NAPKIT_API napkit_status napkit_camera_create(const napkit_camera_params* params, napkit_camera** out);
NAPKIT_API napkit_status napkit_camera_load(const char* path, napkit_camera** out);
NAPKIT_API napkit_status napkit_camera_save(const napkit_camera* cam, const char* path);
NAPKIT_API napkit_status napkit_camera_get_params(const napkit_camera* cam, napkit_camera_params* out);
/* Pixel coordinates in, pixel coordinates out. */
NAPKIT_API napkit_status napkit_camera_distort(const napkit_camera* cam, double u, double v, double* out_u,
                                               double* out_v);
NAPKIT_API napkit_status napkit_camera_undistort(const napkit_camera* cam, double u, double v, double* out_u,
                                                 double* out_v);
NAPKIT_API void napkit_camera_destroy(napkit_camera* cam);

/* Toy detector fitted at width x height from seed. */
NAPKIT_API napkit_status napkit_detector_create_toy(uint64_t seed, int32_t width, int32_t height,
                                                    napkit_detector** out);
/* Detector served by a shell command speaking the line protocol. */
NAPKIT_API napkit_status napkit_detector_create_external(const char* command, napkit_detector** out);
NAPKIT_API napkit_status napkit_detector_supports_gradients(const napkit_detector* det, int* out);
NAPKIT_API napkit_status napkit_detector_stop_confidence(const napkit_detector* det, napkit_image_view image,
                                                         double* out);
NAPKIT_API void napkit_detector_destroy(napkit_detector* det);

/* Pipeline commands. options_json is a JSON object; on success *result_json
   (if non-null) receives a JSON summary to release with napkit_free_string. */
NAPKIT_API napkit_status napkit_compose(const char* options_json, char** result_json);
NAPKIT_API napkit_status napkit_attack(const char* options_json, char** result_json);
NAPKIT_API napkit_status napkit_evaluate(const char* options_json, char** result_json);
NAPKIT_API napkit_status napkit_report(const char* options_json, char** result_json);
/* Serves a detector on stdin/stdout until stdin closes. */
NAPKIT_API napkit_status napkit_serve_detector(const char* options_json);

NAPKIT_API void napkit_free_string(char* s);

#ifdef __cplusplus
}
#endif

#endif /* NAPKIT_H */
