#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "napkit/adapters.hpp"
#include "napkit/camera.hpp"
#include "napkit/image.hpp"

namespace napkit {

enum class Slot { Center, Upper, Lower };

std::string_view to_string(Slot slot) noexcept;
Slot parse_slot(std::string_view name);

struct OverlayPlacement {
  Slot slot = Slot::Center;
  double size_fraction = 0.696;  // patch side / shorter sign-box side
};

/// Integer pixel square the patch occupies in a frame.
struct PatchRegion {
  int left = 0;
  int top = 0;
  int side = 0;
};

/// Throws BoxTooSmall when the resized patch would be under 2 px.
PatchRegion patch_region(int frame_width, int frame_height, const BBox& sign_box,
                         const OverlayPlacement& placement);

/// Pastes `patch` (square, same channel count) resized into the sign box.
Image overlay_patch(const Image& scene, const BBox& sign_box, const Image& patch,
                    const OverlayPlacement& placement);

/// Adjoint of overlay_patch w.r.t. the patch pixels.
Image overlay_patch_adjoint(const Image& scene_gradient, const BBox& sign_box, int patch_side,
                            const OverlayPlacement& placement);

/// Anisotropic L1 total variation divided by the number of difference terms.
double tv_loss(const Image& patch);
/// Subgradient of tv_loss with sign(0) = 0.
Image tv_loss_gradient(const Image& patch);

struct Scene {
  Image image;
  BBox sign_box;
};

struct LossGradient {
  double value = 0.0;
  Image patch_gradient;
};

/// Mean over the scenes of stop_confidence(overlay_patch(scene)).
double detection_loss(std::span<const Scene> scenes, const Image& patch, const OverlayPlacement& placement,
                      const DetectorAdapter& detector);

/// The L_det term as seen by the optimizer.
class DetectionObjective {
 public:
  virtual ~DetectionObjective() = default;
  virtual std::size_t set_size() const = 0;
  virtual bool supports_gradients() const = 0;
  /// L_det over the scenes in `batch` and its gradient w.r.t. the patch.
  virtual LossGradient evaluate(const Image& patch, std::span<const std::size_t> batch) const = 0;
  /// Mean STOP confidence over the whole set.
  virtual double mean_confidence(const Image& patch) const;
};

class SceneObjective final : public DetectionObjective {
 public:
  SceneObjective(std::vector<Scene> scenes, OverlayPlacement placement,
                 std::shared_ptr<const DetectorAdapter> detector);

  std::size_t set_size() const override { return scenes_.size(); }
  bool supports_gradients() const override { return detector_->supports_gradients(); }
  LossGradient evaluate(const Image& patch, std::span<const std::size_t> batch) const override;
  double mean_confidence(const Image& patch) const override;

  std::span<const Scene> scenes() const noexcept { return scenes_; }
  const OverlayPlacement& placement() const noexcept { return placement_; }

 private:
  std::vector<Scene> scenes_;
  OverlayPlacement placement_;
  std::shared_ptr<const DetectorAdapter> detector_;
};

enum class UpdateRule { GradientDescent, Adam };

std::string_view to_string(UpdateRule rule) noexcept;
UpdateRule parse_update_rule(std::string_view name);

struct BatchPolicy {
  std::size_t full_batch_limit = 64;
  std::size_t minibatch_size = 16;
};

/// Scene indices used at `iteration`: everything up to the limit, otherwise
/// a seeded sample without replacement.
std::vector<std::size_t> batch_indices(std::size_t set_size, const BatchPolicy& policy, std::uint64_t seed,
                                       int iteration);

struct LossRecord {
  int iteration = 0;
  double l_det = 0.0;
  double l_tv = 0.0;
  double l_total = 0.0;
  double mean_stop_conf = 0.0;
};

struct LatentState {
  std::vector<double> z;
  double eta = 0.02;
  double lambda_tv = 0.1;
  int iteration = 0;
  std::vector<LossRecord> history;  // one record per visited iterate
  std::vector<double> gradient;     // d L_total / dz at z
  UpdateRule rule = UpdateRule::GradientDescent;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
};

struct StepContext {
  const DetectionObjective& objective;
  const GeneratorAdapter& generator;
  BatchPolicy batch{};
  std::uint64_t seed = 0;
};

struct Evaluation {
  LossRecord record;
  std::vector<double> gradient;
  Image patch;
};

/// L_total = L_det + lambda_tv * L_tv at z, with the chained gradient
/// (detector -> overlay adjoint -> generator).
Evaluation evaluate_latent(std::span<const double> z, double lambda_tv, int iteration, const StepContext& ctx);

/// Evaluates z0 and returns the iteration-0 state.
LatentState init_state(std::vector<double> z0, double eta, double lambda_tv, const StepContext& ctx,
                       UpdateRule rule = UpdateRule::GradientDescent);

/// One update z <- z - eta * grad, followed by evaluation of the new iterate.
/// Throws NonFiniteGradient without touching `state`.
LatentState step(const LatentState& state, const StepContext& ctx);

struct PatchCandidate {
  Image patch;
  std::vector<double> z;
  double confidence = 1.0;
  int iteration = 0;
  std::string init_label;
};

struct OptimizeConfig {
  int iterations = 500;  // iterates per initialization, including iteration 0
  double eta = 0.02;
  double lambda_tv = 0.1;
  std::vector<std::string> init_labels{"peacock", "dog", "bear"};
  std::uint64_t seed = 0;
  UpdateRule rule = UpdateRule::GradientDescent;
  BatchPolicy batch{};
  int checkpoint_every = 50;
  int candidate_every = 50;
  std::filesystem::path run_dir;  // empty: nothing written
  bool resume = false;

  void validate() const;
};

struct InitRun {
  std::string label;
  std::vector<LossRecord> history;
  PatchCandidate best;
};

struct OptimizeResult {
  PatchCandidate best;
  std::vector<InitRun> runs;
};

/// Runs every initialization and returns P*, the lowest-confidence candidate
/// (ties: earlier iteration, then earlier initialization).
OptimizeResult optimize(const OptimizeConfig& config, const DetectionObjective& objective,
                        const GeneratorAdapter& generator);

std::string loss_history_csv(std::span<const LossRecord> history);

}  // namespace napkit
