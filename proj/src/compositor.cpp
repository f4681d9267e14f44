#include "napkit/compositor.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "napkit/error.hpp"
#include "napkit/image_io.hpp"
#include "napkit/parallel.hpp"

namespace napkit {

namespace fs = std::filesystem;

double compute_margb(const Image& img) {
  if (img.empty()) fail(ErrorKind::EmptyImage, "maRGB of an empty image is undefined");
  double sum = 0.0;
  for (double v : img.data()) sum += v;
  return 255.0 * sum / static_cast<double>(img.size());
}

SignInstance SignInstance::make(Image pixels, int class_id, std::string source_id) {
  SignInstance s;
  s.margb = compute_margb(pixels);
  s.pixels = std::move(pixels);
  s.class_id = class_id;
  s.source_id = std::move(source_id);
  return s;
}

Background Background::prepare(const Image& raw, const CameraModel& cam, std::string source_id) {
  Background bg;
  bg.pixels = remap_image(raw, cam, RemapDirection::Undistort);
  bg.margb = compute_margb(bg.pixels);
  bg.undistorted = true;
  bg.source_id = std::move(source_id);
  return bg;
}

void CompositeConfig::validate() const {
  if (!(scale_min > 0.0 && scale_min <= scale_max && scale_max < 1.0)) {
    fail(ErrorKind::ValidationError, "scale range must satisfy 0 < scale_min <= scale_max < 1");
  }
  if (!(margin >= 0.0 && margin < 0.5)) fail(ErrorKind::ValidationError, "margin must be in [0, 0.5)");
  if (!(tau_dark >= 0.0 && tau_dark <= 255.0)) fail(ErrorKind::ValidationError, "tau_dark must be in [0, 255]");
  if (max_dark_retries < 0) fail(ErrorKind::ValidationError, "max_dark_retries must be >= 0");
  for (const auto& [cls, count] : targets) {
    if (count < 0) {
      fail(ErrorKind::ValidationError, "target count for class " + std::to_string(cls) + " is negative");
    }
  }
}

std::size_t select_background_index(const SignInstance& sign, std::span<const Background> pool) {
  if (pool.empty()) fail(ErrorKind::EmptyPool, "background pool is empty");
  std::size_t best = 0;
  double best_gap = std::abs(pool[0].margb - sign.margb);
  for (std::size_t i = 1; i < pool.size(); ++i) {
    const double gap = std::abs(pool[i].margb - sign.margb);
    if (gap < best_gap) {
      best = i;
      best_gap = gap;
    }
  }
  return best;
}

const Background& select_background(const SignInstance& sign, std::span<const Background> pool) {
  return pool[select_background_index(sign, pool)];
}

Image rescale_brightness(const Image& pixels, double ratio) {
  if (!(ratio >= 0.0) || !std::isfinite(ratio)) {
    fail(ErrorKind::InvalidArgument, "brightness ratio must be finite and non-negative");
  }
  Image out = pixels;
  for (double& v : out.data()) {
    const double byte = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    v =std::clamp(std::floor(byte * ratio + 0.5), 0.0, 255.0) / 255.0;
  }
  return out;
}

Image rescale_brightness(const SignInstance& sign, const Background& bg) {
  if (sign.margb <= 0.0) {
    fail(ErrorKind::ZeroBrightness, "sign " + sign.source_id + " has zero maRGB");
  }
  return rescale_brightness(sign.pixels, bg.margb / sign.margb);
}

namespace {

void require_undistorted(const Background& bg) {
  if (!bg.undistorted) {
    fail(ErrorKind::BackgroundNotUndistorted,
         "background " + bg.source_id + " must be undistorted before compositing");
  }
}

std::pair<int, int> pasted_size(const Image& sign, int frame_height, double scale) {
  if (sign.empty()) fail(ErrorKind::EmptyImage, "sign crop is empty");
  const int h = std::max(1, static_cast<int>(std::lround(scale * frame_height)));
  const int w = std::max(
      1, static_cast<int>(std::lround(h * static_cast<double>(sign.width()) / sign.height())));
  return {w, h};
}

PasteResult paste_at_pixels(const Background& bg, const Image& sign, int class_id, double scale,
                            int w, int h, int left, int top) {
  const Image resized = resize_bilinear(sign, w, h);
  PasteResult r;
  r.image = bg.pixels;
  if (resized.channels() != r.image.channels()) {
    fail(ErrorKind::DimensionMismatch, "sign and background channel counts differ");
  }
  blit(r.image, resized, left, top);
  const double W = r.image.width();
  const double H = r.image.height();
  r.box = BBox::from_edges(class_id, left / W, top / H, (left + w) / W, (top + h) / H);
  r.scale = scale;
  r.left = left;
  r.top = top;
  r.width = w;
  r.height = h;
  return r;
}

}  // namespace

PasteResult paste_sign_at(const Background& bg, const Image& sign, int class_id, double scale,
                          double center_x, double center_y) {
  require_undistorted(bg);
  const int W = bg.pixels.width();
  const int H = bg.pixels.height();
  const auto [w, h] = pasted_size(sign, H, scale);
  const int left = static_cast<int>(std::lround(center_x * W - 0.5 * w));
  const int top = static_cast<int>(std::lround(center_y * H - 0.5 * h));
  if (w > W || h > H || left < 0 || top < 0 || left + w > W || top + h > H) {
    fail(ErrorKind::ConfigInfeasible, "sign does not fit inside the frame at the requested position");
  }
  return paste_at_pixels(bg, sign, class_id, scale, w, h, left, top);
}

PasteResult paste_sign(const Background& bg, const Image& sign, int class_id,
                       const CompositeConfig& cfg, Rng& rng) {
  require_undistorted(bg);
  const int W = bg.pixels.width();
  const int H = bg.pixels.height();
  const double scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  const auto [w, h] = pasted_size(sign, H, scale);
  const int mx = static_cast<int>(std::ceil(cfg.margin * W));
  const int my = static_cast<int>(std::ceil(cfg.margin * H));
  if (w > W - 2 * mx || h > H - 2 * my) {
    fail(ErrorKind::ConfigInfeasible,
         "a " + std::to_string(w) + "x" + std::to_string(h) + " sign cannot fit a " + std::to_string(W) +
             "x" + std::to_string(H) + " frame with the configured margin");
  }
  const int left = static_cast<int>(rng.uniform_int(mx, W - mx - w));
  const int top = static_cast<int>(rng.uniform_int(my, H - my - h));
  return paste_at_pixels(bg, sign, class_id, scale, w, h, left, top);
}

bool is_too_dark(const Image& img, double tau_dark) { return compute_margb(img) < tau_dark; }

CompositeSample generate_sample(const SignInstance& sign, std::span<const Background> pool,
                                const CameraModel& cam, const CompositeConfig& cfg,
                                std::uint64_t seed, bool reused) {
  cfg.validate();
  const Background& bg = select_background(sign, pool);
  require_undistorted(bg);

  const bool rescale = cfg.brightness == BrightnessPolicy::Always ||
                       (cfg.brightness == BrightnessPolicy::ReuseOnly && reused);
  double ratio = 1.0;
  Image pixels = sign.pixels;
  if (rescale) {
    if (sign.margb <= 0.0) fail(ErrorKind::ZeroBrightness, "sign " + sign.source_id + " has zero maRGB");
    ratio = bg.margb / sign.margb;
    pixels = rescale_brightness(sign.pixels, ratio);
  }

  for (int attempt = 0; attempt <= cfg.max_dark_retries; ++attempt) {
    const std::uint64_t attempt_seed = seed + static_cast<std::uint64_t>(attempt) * 0x9E3779B97F4A7C15ULL;
    Rng rng(attempt_seed);
    PasteResult paste = paste_sign(bg, pixels, sign.class_id, cfg, rng);
    CompositeSample sample;
    sample.image = remap_image(paste.image, cam, RemapDirection::Distort);
    sample.label = remap_bbox(paste.box, cam, RemapDirection::Distort);
    const bool dark = is_too_dark(sample.image, cfg.tau_dark);
    if (dark) continue;
    sample.provenance = {attempt_seed, sign.source_id, bg.source_id, paste.scale, paste.left, paste.top,
                         paste.width, paste.height, ratio, reused, false, attempt};
    return sample;
  }
  fail(ErrorKind::TooDarkAfterRetries,
       "composite for sign " + sign.source_id + " stayed below maRGB " + std::to_string(cfg.tau_dark) +
           " after " + std::to_string(cfg.max_dark_retries) + " retries");
}

std::string format_label_line(const BBox& b) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f\n", b.class_id, b.cx, b.cy, b.w, b.h);
  return buf;
}

std::vector<BBox> parse_label_file(const std::string& text) {
  std::vector<BBox> boxes;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    BBox b;
    if (std::sscanf(line.c_str(), "%d %lf %lf %lf %lf", &b.class_id, &b.cx, &b.cy, &b.w, &b.h) != 5) {
      fail(ErrorKind::ParseError, "malformed label line " + std::to_string(line_no) + ": " + line);
    }
    boxes.push_back(b);
  }
  return boxes;
}

std::string manifest_to_json(std::span<const ManifestEntry> entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"id", e.id},
                   {"seed", e.seed},
                   {"sign_source", e.sign_source},
                   {"background_source", e.background_source},
                   {"brightness_ratio", e.brightness_ratio},
                   {"scale", e.scale},
                   {"class_id", e.class_id},
                   {"reused", e.reused},
                   {"dark_retries", e.dark_retries},
                   {"bbox", {e.label.cx, e.label.cy, e.label.w, e.label.h}}});
  }
  return arr.dump(2) + "\n";
}

std::vector<ManifestEntry> manifest_from_json(const std::string& text) {
  std::vector<ManifestEntry> out;
  try {
    const auto arr = nlohmann::json::parse(text);
    if (!arr.is_array()) fail(ErrorKind::ParseError, "manifest must be a JSON array");
    for (const auto& j : arr) {
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.seed = j.at("seed").get<std::uint64_t>();
      e.sign_source = j.at("sign_source").get<std::string>();
      e.background_source = j.at("background_source").get<std::string>();
      e.brightness_ratio = j.at("brightness_ratio").get<double>();
      e.scale = j.at("scale").get<double>();
      e.class_id = j.at("class_id").get<int>();
      e.reused = j.value("reused", false);
      e.dark_retries = j.value("dark_retries", 0);
      if (j.contains("bbox")) {
        const auto& b = j.at("bbox");
        e.label = {e.class_id, b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                   b.at(3).get<double>()};
      }
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorKind::ParseError, std::string("malformed manifest: ") + ex.what());
  }
  return out;
}

std::vector<ManifestEntry> generate_dataset(std::span<const SignInstance> signs,
                                            std::span<const Background> pool, const CameraModel& cam,
                                            const CompositeConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  cam.validate();

  struct Job {
    const SignInstance* sign;
    bool reused;
  };
  std::vector<Job> jobs;
  for (const auto& [cls, target] : cfg.targets) {
    std::vector<const SignInstance*> instances;
    for (const auto& s : signs) {
      if (s.class_id == cls) instances.push_back(&s);
    }
    if (target > 0 && instances.empty()) {
      fail(ErrorKind::InsufficientSources, "class " + std::to_string(cls) + " has no sign instances");
    }
    for (int k = 0; k < target; ++k) {
      const auto idx = static_cast<std::size_t>(k) % instances.size();
      jobs.push_back({instances[idx], static_cast<std::size_t>(k) >= instances.size()});
    }
  }
  if (!jobs.empty() && pool.empty()) fail(ErrorKind::EmptyPool, "background pool is empty");

  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "labels");
  std::vector<ManifestEntry> entries(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%06zu", i);
    const std::uint64_t seed = derive_seed(cfg.seed, i);
    const CompositeSample s = generate_sample(*jobs[i].sign, pool, cam, cfg, seed, jobs[i].reused);
    write_png(out_dir / "images" / (std::string(id) + ".png"), s.image);
    write_text_file(out_dir / "labels" / (std::string(id) + ".txt"), format_label_line(s.label));
    entries[i] = {id,
                  seed,
                  s.provenance.sign_source,
                  s.provenance.background_source,
                  s.provenance.brightness_ratio,
                  s.provenance.scale,
                  s.label.class_id,
                  s.provenance.reused,
                  s.provenance.dark_retries,
                  s.label};
  });
  write_text_file(out_dir / "manifest.json", manifest_to_json(entries));
  return entries;
}

}  // namespace napkit
