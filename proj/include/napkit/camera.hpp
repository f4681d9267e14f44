#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "napkit/image.hpp"

namespace napkit {

struct NormalizedPoint {
  double x = 0.0;
  double y = 0.0;
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

/// Axis-aligned box in normalized image coordinates ([0,1] spans the full
/// frame, pixel edges included).
struct BBox {
  int class_id = 0;
  double cx = 0.5;
  double cy = 0.5;
  double w = 0.0;
  double h = 0.0;

  double left() const noexcept { return cx - 0.5 * w; }
  double right() const noexcept { return cx + 0.5 * w; }
  double top() const noexcept { return cy - 0.5 * h; }
  double bottom() const noexcept { return cy + 0.5 * h; }

  static BBox from_edges(int class_id, double left, double top, double right, double bottom) noexcept {
    return {class_id, 0.5 * (left + right), 0.5 * (top + bottom), right - left, bottom - top};
  }
};

bool is_valid(const BBox& b) noexcept;
/// Throws ValidationError when `b` breaks the box invariants.
void validate(const BBox& b);
double iou(const BBox& a, const BBox& b) noexcept;

/// Pinhole intrinsics plus Brown-Conrady distortion (k1, k2, k3 radial;
/// p1, p2 tangential).
struct CameraModel {
  double fx = 600.0;
  double fy = 600.0;
  double cx = 319.5;
  double cy = 239.5;
  double skew = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  int width = 640;
  int height = 480;

  /// Throws ValidationError on fx/fy/width/height <= 0 or non-finite values.
  void validate() const;
  bool has_distortion() const noexcept {
    return k1 != 0.0 || k2 != 0.0 || k3 != 0.0 || p1 != 0.0 || p2 != 0.0;
  }

  PixelPoint to_pixel(NormalizedPoint p) const noexcept {
    return {fx * p.x + skew * p.y + cx, fy * p.y + cy};
  }
  NormalizedPoint to_normalized(PixelPoint p) const noexcept {
    const double y = (p.v - cy) / fy;
    return {(p.u - cx - skew * y) / fx, y};
  }

  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

enum class RemapDirection { Undistort, Distort };

NormalizedPoint distort_point(NormalizedPoint p, const CameraModel& cam) noexcept;

/// Inverse of distort_point by damped fixed-point iteration (50 iterations,
/// 1e-9 tolerance). Throws NonConvergence if the residual stays above 1e-6.
NormalizedPoint undistort_point(NormalizedPoint p, const CameraModel& cam);
std::optional<NormalizedPoint> try_undistort_point(NormalizedPoint p, const CameraModel& cam) noexcept;

/// Where a pixel of the source image lands after remapping in `dir`.
std::optional<PixelPoint> map_pixel(PixelPoint p, const CameraModel& cam, RemapDirection dir) noexcept;

/// Precomputed per-pixel source lookup for one (camera, direction) pair.
class Remapper {
 public:
  Remapper(const CameraModel& cam, RemapDirection dir);

  /// Shared instance from a small process-wide cache.
  static std::shared_ptr<const Remapper> cached(const CameraModel& cam, RemapDirection dir);

  Image apply(const Image& img) const;
  const CameraModel& camera() const noexcept { return cam_; }

 private:
  struct Tap {
    int x0 = -1;  // -1 marks an out-of-bounds source
    int y0 = 0;
    double ax = 0.0;
    double ay = 0.0;
  };

  CameraModel cam_;
  RemapDirection dir_;
  bool identity_;
  std::vector<Tap> taps_;
};

/// Resamples `img` (bilinear, zero fill). Throws DimensionMismatch when the
/// image size differs from the camera resolution.
Image remap_image(const Image& img, const CameraModel& cam, RemapDirection dir);

/// Maps 32 boundary samples and returns their clamped axis-aligned hull.
BBox remap_bbox(const BBox& b, const CameraModel& cam, RemapDirection dir);

CameraModel parse_calibration(const std::string& json_text);
std::string serialize_calibration(const CameraModel& cam);
CameraModel load_calibration(const std::filesystem::path& path);
void save_calibration(const CameraModel& cam, const std::filesystem::path& path);

}  // namespace napkit
