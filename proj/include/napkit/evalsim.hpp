#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "napkit/adapters.hpp"
#include "napkit/camera.hpp"
#include "napkit/image.hpp"
#include "napkit/optimizer.hpp"

namespace napkit {

inline constexpr const char* kCleanType = "clean";
inline constexpr const char* kNoneField = "none";

struct SizeSpec {
  std::string name;
  double fraction = 0.0;  // patch side / sign side
};

struct PatchType {
  std::string name;
  Image pixels;  // square, values in [0,1]
};

/// 640x480, f = 600 px, mild barrel distortion.
CameraModel default_eval_camera();
/// Small/medium/large fractions that give 6.3%, 10.7% and 14.2% frame
/// coverage at 0.30 m under the default geometry.
std::vector<SizeSpec> default_sizes();
/// Plain white and black occluders.
std::vector<PatchType> occluder_patch_types(int side = 32);

struct SweepConfig {
  std::vector<double> distances{0.30, 0.38, 0.45, 0.60, 0.90};
  std::vector<PatchType> patch_types;
  std::vector<SizeSpec> sizes = default_sizes();
  std::vector<Slot> placements{Slot::Center, Slot::Upper, Slot::Lower};
  int window = 150;           // frames per cell (15 s at 10 fps)
  double sign_side_m = 0.15;  // physical sign width
  double jitter = 3.0;        // +/- brightness jitter in 8-bit steps
  double anchor_x = 0.5;      // sign center, fraction of frame width
  double anchor_y = 0.4;      // sign center, fraction of frame height
  std::uint64_t seed = 0;
  int jobs = 1;
  CameraModel camera = default_eval_camera();
  Image background;  // empty: procedural background from seed
  Image sign;        // empty: procedural STOP sign

  void validate() const;
};

struct CellKey {
  double distance = 0.0;
  std::string patch_type = kCleanType;
  std::string size = kNoneField;
  std::string placement = kNoneField;

  bool clean() const noexcept { return patch_type == kCleanType; }
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct EvalRecord {
  CellKey key;
  std::vector<double> confidences;
  double mean = 0.0;
  std::optional<double> delta;  // C_patch - C_clean at the same distance
  std::string status = "ok";
};

/// Pinhole image size in pixels of an object of side `side_m` at `distance_m`.
double projected_size(double side_m, double distance_m, double focal_px);

/// Renders frames of the physical-proxy scene for one SweepConfig.
class SceneRenderer {
 public:
  explicit SceneRenderer(const SweepConfig& config);

  /// Sign box (normalized) at distance d.
  BBox sign_box(double distance) const;
  /// Undistorted scene with the sign, and the patch when given.
  Image compose(const Image* patch, double distance, const OverlayPlacement& placement) const;
  /// compose() passed through the camera distortion.
  Image render_base(const Image* patch, double distance, const OverlayPlacement& placement) const;
  /// Per-frame brightness offset in 8-bit steps.
  int jitter_offset(int frame_index) const;
  Image apply_jitter(const Image& base, int frame_index) const;
  Image render(const Image* patch, double distance, const OverlayPlacement& placement, int frame_index) const;

  /// Patch pixel count over frame pixel count.
  double patch_coverage(double distance, double size_fraction) const;

 private:
  const SweepConfig& config_;
  Image background_;
  Image sign_;
};

Image render_scene(const SweepConfig& config, const Image* patch, double distance,
                   const OverlayPlacement& placement, int frame_index);

EvalRecord run_cell(const SweepConfig& config, const CellKey& cell, const DetectorAdapter& detector,
                    const EvalRecord* clean = nullptr);

/// Clean cell per distance plus the full type x size x placement x distance
/// grid. Failing cells are kept with an error status.
std::vector<EvalRecord> run_sweep(const SweepConfig& config, const DetectorAdapter& detector);

std::string records_csv(std::span<const EvalRecord> records);
/// Groups per-frame rows back into records (means and deltas recomputed).
std::vector<EvalRecord> parse_records_csv(const std::string& text);

}  // namespace napkit
