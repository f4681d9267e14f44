/* Exercises the shared library through its C header only. */
#include <stdio.h>
#include <string.h>

#include "napkit/napkit.h"

static int failures = 0;

#define EXPECT(cond)                                          \
  do {                                                        \
    if (!(cond)) {                                            \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                             \
    }                                                         \
  } while (0)

int main(void) {
  napkit_camera_params p = {600, 600, 319.5, 239.5, 0, 0.05, 0, 0, 0.01, 0, 640, 480};
  napkit_camera* cam = NULL;
  EXPECT(napkit_camera_create(&p, &cam) == NAPKIT_OK);
  double u = 0, v = 0;
  EXPECT(napkit_camera_distort(cam, 319.5 + 0.3 * 600, 239.5 + 0.4 * 600, &u, &v) == NAPKIT_OK);
  EXPECT(u > 319.5 + 0.30615 * 600 - 1e-6 && u < 319.5 + 0.30615 * 600 + 1e-6);
  EXPECT(v > 239.5 + 0.4107 * 600 - 1e-6 && v < 239.5 + 0.4107 * 600 + 1e-6);
  double bu = 0, bv = 0;
  EXPECT(napkit_camera_undistort(cam, u, v, &bu, &bv) == NAPKIT_OK);
  EXPECT(bu > 499.5 - 1e-5 && bu < 499.5 + 1e-5);
  napkit_camera_destroy(cam);

  p.fx = -1;
  cam = NULL;
  EXPECT(napkit_camera_create(&p, &cam) == NAPKIT_ERR_CONFIG);
  EXPECT(cam == NULL);

  EXPECT(napkit_camera_load("/nonexistent/napkit_calib.json", &cam) == NAPKIT_ERR_DATA);
  EXPECT(strstr(napkit_last_error(), "napkit_calib.json") != NULL);
  EXPECT(strcmp(napkit_last_error_kind(), "IoError") == 0);

  char* result = NULL;
  EXPECT(napkit_report("{ not json", &result) == NAPKIT_ERR_CONFIG);
  EXPECT(result == NULL);
  EXPECT(napkit_camera_create(NULL, &cam) == NAPKIT_ERR_CONFIG);

  napkit_detector* det = NULL;
  EXPECT(napkit_detector_create_toy(7, 32, 24, &det) == NAPKIT_OK);
  int grads = 0;
  EXPECT(napkit_detector_supports_gradients(det, &grads) == NAPKIT_OK && grads == 1);
  static uint8_t pixels[32 * 24 * 3];
  memset(pixels, 128, sizeof(pixels));
  napkit_image_view view = {pixels, 32, 24};
  double conf = -1;
  EXPECT(napkit_detector_stop_confidence(det, view, &conf) == NAPKIT_OK);
  EXPECT(conf >= 0 && conf <= 1);
  view.width = 33;
  EXPECT(napkit_detector_stop_confidence(det, view, &conf) == NAPKIT_ERR_CONFIG);
  napkit_detector_destroy(det);

  EXPECT(strlen(napkit_version()) > 0);
  if (failures == 0) printf("capi smoke: ok\n");
  return failures == 0 ? 0 : 1;
}
