#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "napkit/camera.hpp"
#include "napkit/image.hpp"
#include "napkit/rng.hpp"

namespace napkit {

/// Mean over all pixels and channels, on the 0..255 scale.
double compute_margb(const Image& img);

struct SignInstance {
  Image pixels;
  int class_id = 0;
  double margb = 0.0;
  std::string source_id;

  static SignInstance make(Image pixels, int class_id, std::string source_id);
};

struct Background {
  Image pixels;
  double margb = 0.0;
  bool undistorted = false;
  std::string source_id;

  /// Undistorts a raw platform frame through `cam` and records its maRGB.
  static Background prepare(const Image& raw, const CameraModel& cam, std::string source_id);
};

enum class BrightnessPolicy { ReuseOnly, Always, Never };

struct CompositeConfig {
  double scale_min = 0.05;  // sign height as a fraction of frame height
  double scale_max = 0.4;
  double margin = 0.02;     // fraction of each frame dimension kept clear
  double tau_dark = 25.0;   // maRGB threshold on the 0..255 scale
  std::map<int, int> targets;
  std::uint64_t seed = 0;
  BrightnessPolicy brightness = BrightnessPolicy::ReuseOnly;
  int max_dark_retries = 10;
  int jobs = 1;

  void validate() const;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string sign_source;
  std::string background_source;
  double scale = 0.0;
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;
  double brightness_ratio = 1.0;
  bool reused = false;
  bool too_dark = false;
  int dark_retries = 0;
};

struct CompositeSample {
  Image image;
  BBox label;
  Provenance provenance;
};

/// argmin |bg.maRGB - sign.maRGB|; ties go to the lowest index.
std::size_t select_background_index(const SignInstance& sign, std::span<const Background> pool);
const Background& select_background(const SignInstance& sign, std::span<const Background> pool);

/// Multiplies every 8-bit channel value by `ratio`, rounds half-up and clamps
/// to [0,255].
Image rescale_brightness(const Image& pixels, double ratio);
Image rescale_brightness(const SignInstance& sign, const Background& bg);

struct PasteResult {
  Image image;
  BBox box;
  double scale = 0.0;
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;
};

/// Pastes `sign` resized to round(scale * frame height) rows (aspect kept)
/// centered at the normalized position (center_x, center_y).
PasteResult paste_sign_at(const Background& bg, const Image& sign, int class_id, double scale,
                          double center_x, double center_y);

/// Draws scale and position from `cfg` and pastes the sign fully inside the
/// margins.
PasteResult paste_sign(const Background& bg, const Image& sign, int class_id,
                       const CompositeConfig& cfg, Rng& rng);

/// Strict: maRGB exactly equal to the threshold is not dark.
bool is_too_dark(const Image& img, double tau_dark);

CompositeSample generate_sample(const SignInstance& sign, std::span<const Background> pool,
                                const CameraModel& cam, const CompositeConfig& cfg,
                                std::uint64_t seed, bool reused);

struct ManifestEntry {
  std::string id;
  std::uint64_t seed = 0;
  std::string sign_source;
  std::string background_source;
  double brightness_ratio = 1.0;
  double scale = 0.0;
  int class_id = 0;
  bool reused = false;
  int dark_retries = 0;
  BBox label;
};

/// Emits exactly cfg.targets[c] samples per class, cycling through the class
/// instances (second and later uses are reuses). Writes images/<id>.png,
/// labels/<id>.txt and manifest.json under `out_dir`.
std::vector<ManifestEntry> generate_dataset(std::span<const SignInstance> signs,
                                            std::span<const Background> pool, const CameraModel& cam,
                                            const CompositeConfig& cfg,
                                            const std::filesystem::path& out_dir);

std::string format_label_line(const BBox& b);
std::string manifest_to_json(std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> manifest_from_json(const std::string& text);
/// Parses one label file; each line "class_id cx cy w h".
std::vector<BBox> parse_label_file(const std::string& text);

}  // namespace napkit
