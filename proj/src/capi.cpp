#include "napkit/napkit.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <new>
#include <string>

#include "napkit/adapters.hpp"
#include "napkit/camera.hpp"
#include "napkit/error.hpp"
#include "napkit/pipeline.hpp"

struct napkit_camera {
  napkit::CameraModel model;
};

struct napkit_detector {
  std::shared_ptr<const napkit::DetectorAdapter> adapter;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_kind;

void set_error(std::string kind, std::string message) {
  g_last_kind = std::move(kind);
  g_last_error = std::move(message);
}

template <typename Fn>
napkit_status guarded(Fn&& fn) {
  try {
    fn();
    set_error("", "");
    return NAPKIT_OK;
  } catch (const napkit::Error& e) {
    set_error(std::string(napkit::to_string(e.kind())), e.what());
    return static_cast<napkit_status>(napkit::category_of(e.kind()));
  } catch (const nlohmann::json::exception& e) {
    set_error("ParseError", e.what());
    return NAPKIT_ERR_CONFIG;
  } catch (const std::filesystem::filesystem_error& e) {
    set_error("IoError", e.what());
    return NAPKIT_ERR_DATA;
  } catch (const std::bad_alloc&) {
    set_error("Internal", "out of memory");
    return NAPKIT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    set_error("Internal", e.what());
    return NAPKIT_ERR_INTERNAL;
  } catch (...) {
    set_error("Internal", "unknown error");
    return NAPKIT_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) napkit::fail(napkit::ErrorKind::InvalidArgument, std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

napkit_status run_command(std::string (*fn)(const std::string&), const char* options_json, char** result_json) {
  if (result_json != nullptr) *result_json = nullptr;
  return guarded([&] {
    const std::string result = fn(options_json != nullptr ? options_json : "");
    if (result_json != nullptr) *result_json = dup_string(result);
  });
}

}  // namespace

extern "C" {

const char* napkit_version(void) { return napkit::kToolVersion; }

const char* napkit_last_error(void) { return g_last_error.c_str(); }

const char* napkit_last_error_kind(void) { return g_last_kind.c_str(); }

napkit_status napkit_camera_create(const napkit_camera_params* params, napkit_camera** out) {
  return guarded([&] {
    require(params, "params");
    require(out, "out");
    napkit::CameraModel m;
    m.fx = params->fx;
    m.fy = params->fy;
    m.cx = params->cx;
    m.cy = params->cy;
    m.skew = params->skew;
    m.k1 = params->k1;
    m.k2 = params->k2;
    m.k3 = params->k3;
    m.p1 = params->p1;
    m.p2 = params->p2;
    m.width = params->width;
    m.height = params->height;
    m.validate();
    *out = new napkit_camera{m};
  });
}

napkit_status napkit_camera_load(const char* path, napkit_camera** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new napkit_camera{napkit::load_calibration(path)};
  });
}

napkit_status napkit_camera_save(const napkit_camera* cam, const char* path) {
  return guarded([&] {
    require(cam, "camera");
    require(path, "path");
    napkit::save_calibration(cam->model, path);
  });
}

napkit_status napkit_camera_get_params(const napkit_camera* cam, napkit_camera_params* out) {
  return guarded([&] {
    require(cam, "camera");
    require(out, "out");
    const auto& m = cam->model;
    *out = {m.fx, m.fy, m.cx, m.cy, m.skew, m.k1, m.k2, m.k3, m.p1, m.p2, m.width, m.height};
  });
}

napkit_status napkit_camera_distort(const napkit_camera* cam, double u, double v, double* out_u, double* out_v) {
  return guarded([&] {
    require(cam, "camera");
    require(out_u, "out_u");
    require(out_v, "out_v");
    const auto p = cam->model.to_pixel(napkit::distort_point(cam->model.to_normalized({u, v}), cam->model));
    *out_u = p.u;
    *out_v = p.v;
  });
}

napkit_status napkit_camera_undistort(const napkit_camera* cam, double u, double v, double* out_u, double* out_v) {
  return guarded([&] {
    require(cam, "camera");
    require(out_u, "out_u");
    require(out_v, "out_v");
    const auto p = cam->model.to_pixel(napkit::undistort_point(cam->model.to_normalized({u, v}), cam->model));
    *out_u = p.u;
    *out_v = p.v;
  });
}

void napkit_camera_destroy(napkit_camera* cam) { delete cam; }

napkit_status napkit_detector_create_toy(uint64_t seed, int32_t width, int32_t height, napkit_detector** out) {
  return guarded([&] {
    require(out, "out");
    *out = new napkit_detector{napkit::make_detector("toy", seed, width, height)};
  });
}

napkit_status napkit_detector_create_external(const char* command, napkit_detector** out) {
  return guarded([&] {
    require(command, "command");
    require(out, "out");
    *out = new napkit_detector{napkit::make_detector(std::string("external:") + command, 0)};
  });
}

napkit_status napkit_detector_supports_gradients(const napkit_detector* det, int* out) {
  return guarded([&] {
    require(det, "detector");
    require(out, "out");
    *out = det->adapter->supports_gradients() ? 1 : 0;
  });
}

napkit_status napkit_detector_stop_confidence(const napkit_detector* det, napkit_image_view image, double* out) {
  return guarded([&] {
    require(det, "detector");
    require(out, "out");
    require(image.data, "image.data");
    if (image.width <= 0 || image.height <= 0) {
      napkit::fail(napkit::ErrorKind::InvalidArgument, "image dimensions must be positive");
    }
    const std::size_t n = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height) * 3;
    const auto img = napkit::Image::from_bytes(image.width, image.height, 3, {image.data, n});
    *out = det->adapter->stop_confidence(img);
  });
}

void napkit_detector_destroy(napkit_detector* det) { delete det; }

napkit_status napkit_compose(const char* options_json, char** result_json) {
  return run_command(napkit::run_compose, options_json, result_json);
}

napkit_status napkit_attack(const char* options_json, char** result_json) {
  return run_command(napkit::run_attack, options_json, result_json);
}

napkit_status napkit_evaluate(const char* options_json, char** result_json) {
  return run_command(napkit::run_evaluate, options_json, result_json);
}

napkit_status napkit_report(const char* options_json, char** result_json) {
  return run_command(napkit::run_report, options_json, result_json);
}

napkit_status napkit_serve_detector(const char* options_json) {
  return guarded([&] { napkit::run_serve(options_json != nullptr ? options_json : "", std::cin, std::cout); });
}

void napkit_free_string(char* s) { std::free(s); }

}  // extern "C"
