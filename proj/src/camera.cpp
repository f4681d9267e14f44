#include "napkit/camera.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <mutex>
#include <tuple>

#include <json.hpp>

#include "napkit/error.hpp"
#include "napkit/image_io.hpp"

namespace napkit {

namespace {

constexpr int kMaxUndistortIterations = 50;
constexpr double kUndistortTolerance = 1e-9;
constexpr double kUndistortAcceptance = 1e-6;
constexpr int kBoundarySamplesPerEdge = 8;  // 32 in total

bool finite(double v) noexcept { return std::isfinite(v); }

}  // namespace

bool is_valid(const BBox& b) noexcept {
  constexpr double eps = 1e-12;
  if (!(finite(b.cx) && finite(b.cy) && finite(b.w) && finite(b.h))) return false;
  if (b.w <= 0.0 || b.h <= 0.0 || b.w > 1.0 + eps || b.h > 1.0 + eps) return false;
  return b.left() >= -eps && b.top() >= -eps && b.right() <= 1.0 + eps && b.bottom() <= 1.0 + eps;
}

void validate(const BBox& b) {
  if (!is_valid(b)) {
    fail(ErrorKind::ValidationError,
         "bounding box outside the unit square or with non-positive size (cx=" + std::to_string(b.cx) +
             " cy=" + std::to_string(b.cy) + " w=" + std::to_string(b.w) + " h=" + std::to_string(b.h) + ")");
  }
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

void CameraModel::validate() const {
  const double values[] = {fx, fy, cx, cy, skew, k1, k2, k3, p1, p2};
  for (double v : values) {
    if (!finite(v)) fail(ErrorKind::ValidationError, "camera parameters must be finite");
  }
  if (fx <= 0.0) fail(ErrorKind::ValidationError, "fx must be > 0");
  if (fy <= 0.0) fail(ErrorKind::ValidationError, "fy must be > 0");
  if (width <= 0) fail(ErrorKind::ValidationError, "width must be > 0");
  if (height <= 0) fail(ErrorKind::ValidationError, "height must be > 0");
}

NormalizedPoint distort_point(NormalizedPoint p, const CameraModel& cam) noexcept {
  const double x = p.x;
  const double y = p.y;
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (cam.k1 + r2 * (cam.k2 + r2 * cam.k3));
  const double xd = x * radial + 2.0 * cam.p1 * x * y + cam.p2 * (r2 + 2.0 * x * x);
  const double yd = y * radial + cam.p1 * (r2 + 2.0 * y * y) + 2.0 * cam.p2 * x * y;
  return {xd, yd};
}

namespace {

double residual(NormalizedPoint guess, NormalizedPoint target, const CameraModel& cam) noexcept {
  const auto d = distort_point(guess, cam);
  return std::hypot(d.x - target.x, d.y - target.y);
}

}  // namespace

std::optional<NormalizedPoint> try_undistort_point(NormalizedPoint p, const CameraModel& cam) noexcept {
  if (!cam.has_distortion()) return p;
  if (!finite(p.x) || !finite(p.y)) return std::nullopt;

  NormalizedPoint cur = p;
  double res = residual(cur, p, cam);
  double damping = 1.0;
  for (int it = 0; it < kMaxUndistortIterations && res > kUndistortTolerance; ++it) {
    const double x = cur.x;
    const double y = cur.y;
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (cam.k1 + r2 * (cam.k2 + r2 * cam.k3));
    if (!(radial > 0.0)) return std::nullopt;
    const double tx = 2.0 * cam.p1 * x * y + cam.p2 * (r2 + 2.0 * x * x);
    const double ty = cam.p1 * (r2 + 2.0 * y * y) + 2.0 * cam.p2 * x * y;
    const NormalizedPoint target{(p.x - tx) / radial, (p.y - ty) / radial};

    NormalizedPoint next{cur.x + damping * (target.x - cur.x), cur.y + damping * (target.y - cur.y)};
    double next_res = residual(next, p, cam);
    // Shrink the step while the update makes things worse.
    while (!(next_res < res) && damping > 1.0 / 64.0) {
      damping *= 0.5;
      next = {cur.x + damping * (target.x - cur.x), cur.y + damping * (target.y - cur.y)};
      next_res = residual(next, p, cam);
    }
    if (!(next_res < res)) break;
    cur = next;
    res = next_res;
  }
  if (!(res <= kUndistortAcceptance)) return std::nullopt;
  return cur;
}

NormalizedPoint undistort_point(NormalizedPoint p, const CameraModel& cam) {
  if (auto r = try_undistort_point(p, cam)) return *r;
  fail(ErrorKind::NonConvergence,
       "undistortion did not converge for normalized point (" + std::to_string(p.x) + ", " +
           std::to_string(p.y) + ")");
}

std::optional<PixelPoint> map_pixel(PixelPoint p, const CameraModel& cam, RemapDirection dir) noexcept {
  const auto n = cam.to_normalized(p);
  if (dir == RemapDirection::Distort) return cam.to_pixel(distort_point(n, cam));
  const auto u = try_undistort_point(n, cam);
  if (!u) return std::nullopt;
  return cam.to_pixel(*u);
}

Remapper::Remapper(const CameraModel& cam, RemapDirection dir)
    : cam_(cam), dir_(dir), identity_(!cam.has_distortion()) {
  cam_.validate();
  if (identity_) return;
  taps_.resize(static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height));
  // The output pixel q reads the source at the inverse of the forward map.
  const RemapDirection inverse =
      dir == RemapDirection::Distort ? RemapDirection::Undistort : RemapDirection::Distort;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      Tap& tap = taps_[static_cast<std::size_t>(y) * static_cast<std::size_t>(cam.width) +
                       static_cast<std::size_t>(x)];
      const auto src = map_pixel({static_cast<double>(x), static_cast<double>(y)}, cam, inverse);
      if (!src) continue;
      const double u = src->u;
      const double v = src->v;
      if (!(u >= 0.0 && v >= 0.0 && u <= cam.width - 1 && v <= cam.height - 1)) continue;
      tap.x0 = static_cast<int>(std::floor(u));
      tap.y0 = static_cast<int>(std::floor(v));
      tap.ax = u - tap.x0;
      tap.ay = v - tap.y0;
    }
  }
}

std::shared_ptr<const Remapper> Remapper::cached(const CameraModel& cam, RemapDirection dir) {
  static std::mutex mu;
  static std::deque<std::shared_ptr<const Remapper>> cache;
  constexpr std::size_t kCapacity = 8;
  std::lock_guard lock(mu);
  for (const auto& r : cache) {
    if (r->dir_ == dir && r->cam_ == cam) return r;
  }
  auto made = std::make_shared<const Remapper>(cam, dir);
  cache.push_back(made);
  if (cache.size() > kCapacity) cache.pop_front();
  return made;
}

Image Remapper::apply(const Image& img) const {
  if (img.width() != cam_.width || img.height() != cam_.height) {
    fail(ErrorKind::DimensionMismatch,
         "image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
             " but camera expects " + std::to_string(cam_.width) + "x" + std::to_string(cam_.height));
  }
  if (identity_) return img;
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  Image out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Tap& t = taps_[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
      if (t.x0 < 0) continue;
      const int x1 = std::min(t.x0 + 1, w - 1);
      const int y1 = std::min(t.y0 + 1, h - 1);
      for (int c = 0; c < ch; ++c) {
        const double top = (1.0 - t.ax) * img.at(t.x0, t.y0, c) + t.ax * img.at(x1, t.y0, c);
        const double bot = (1.0 - t.ax) * img.at(t.x0, y1, c) + t.ax * img.at(x1, y1, c);
        out.at(x, y, c) = (1.0 - t.ay) * top + t.ay * bot;
      }
    }
  }
  return out;
}

Image remap_image(const Image& img, const CameraModel& cam, RemapDirection dir) {
  cam.validate();
  if (img.width() != cam.width || img.height() != cam.height) {
    fail(ErrorKind::DimensionMismatch,
         "image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
             " but camera expects " + std::to_string(cam.width) + "x" + std::to_string(cam.height));
  }
  if (!cam.has_distortion()) return img;
  return Remapper::cached(cam, dir)->apply(img);
}

BBox remap_bbox(const BBox& b, const CameraModel& cam, RemapDirection dir) {
  validate(b);
  cam.validate();
  if (!cam.has_distortion()) return b;

  const double W = cam.width;
  const double H = cam.height;
  const double l = b.left(), r = b.right(), t = b.top(), btm = b.bottom();
  const std::array<std::array<double, 4>, 4> edges{{
      {l, t, r, t},
      {r, t, r, btm},
      {r, btm, l, btm},
      {l, btm, l, t},
  }};
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  int mapped = 0;
  for (const auto& e : edges) {
    for (int i = 0; i < kBoundarySamplesPerEdge; ++i) {
      const double s = static_cast<double>(i) / kBoundarySamplesPerEdge;
      const double nx = e[0] + s * (e[2] - e[0]);
      const double ny = e[1] + s * (e[3] - e[1]);
      const auto m = map_pixel({nx * W - 0.5, ny * H - 0.5}, cam, dir);
      if (!m) continue;
      const double ox = (m->u + 0.5) / W;
      const double oy = (m->v + 0.5) / H;
      min_x = std::min(min_x, ox);
      max_x = std::max(max_x, ox);
      min_y = std::min(min_y, oy);
      max_y = std::max(max_y, oy);
      ++mapped;
    }
  }
  if (mapped == 0) fail(ErrorKind::DegenerateBox, "no boundary point of the box could be mapped");
  min_x = std::clamp(min_x, 0.0, 1.0);
  max_x = std::clamp(max_x, 0.0, 1.0);
  min_y = std::clamp(min_y, 0.0, 1.0);
  max_y = std::clamp(max_y, 0.0, 1.0);
  if (!(max_x > min_x) || !(max_y > min_y)) {
    fail(ErrorKind::DegenerateBox, "mapped box has zero area");
  }
  return BBox::from_edges(b.class_id, min_x, min_y, max_x, max_y);
}

namespace {

using nlohmann::json;

double number_field(const json& j, const char* key, std::optional<double> fallback = std::nullopt) {
  const auto it = j.find(key);
  if (it == j.end()) {
    if (fallback) return *fallback;
    fail(ErrorKind::ParseError, std::string("calibration is missing field \"") + key + "\"");
  }
  if (!it->is_number()) {
    fail(ErrorKind::ParseError, std::string("calibration field \"") + key + "\" must be a number");
  }
  return it->get<double>();
}

int integer_field(const json& j, const char* key) {
  const double v = number_field(j, key);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    fail(ErrorKind::ParseError, std::string("calibration field \"") + key + "\" must be an integer");
  }
  return static_cast<int>(v);
}

}  // namespace

CameraModel parse_calibration(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ParseError, std::string("calibration is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::ParseError, "calibration must be a JSON object");
  CameraModel cam;
  cam.fx = number_field(j, "fx");
  cam.fy = number_field(j, "fy");
  cam.cx = number_field(j, "cx");
  cam.cy = number_field(j, "cy");
  cam.skew = number_field(j, "skew", 0.0);
  cam.k1 = number_field(j, "k1");
  cam.k2 = number_field(j, "k2");
  cam.p1 = number_field(j, "p1");
  cam.p2 = number_field(j, "p2");
  cam.k3 = number_field(j, "k3", 0.0);
  cam.width = integer_field(j, "width");
  cam.height = integer_field(j, "height");
  cam.validate();
  return cam;
}

std::string serialize_calibration(const CameraModel& cam) {
  json j = {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy},
            {"skew", cam.skew}, {"k1", cam.k1}, {"k2", cam.k2}, {"p1", cam.p1},
            {"p2", cam.p2}, {"k3", cam.k3}, {"width", cam.width}, {"height", cam.height}};
  return j.dump(2) + "\n";
}

CameraModel load_calibration(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_calibration(text);
  } catch (const Error& e) {
    fail(e.kind(), std::string(e.what()) + " (" + path.string() + ")");
  }
}

void save_calibration(const CameraModel& cam, const std::filesystem::path& path) {
  cam.validate();
  write_text_file(path, serialize_calibration(cam));
}

}  // namespace napkit
