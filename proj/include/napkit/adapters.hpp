#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "napkit/camera.hpp"
#include "napkit/image.hpp"

namespace napkit {

/// GTSRB class index of the STOP sign.
inline constexpr int kStopClassId = 14;

struct Detection {
  BBox bbox;
  int class_id = 0;
  double confidence = 0.0;
};

enum class ConfidenceReduction { Max, Mean };

struct DetectorInfo {
  int width = 0;
  int height = 0;
  bool supports_gradients = false;
  bool reentrant = true;
  bool deterministic = true;
  std::map<int, std::string> class_map;
  std::string confidence_definition;
};

/// Detector boundary. stop_confidence reduces the confidences of STOP
/// detections (max by default) and is 0 when there are none.
class DetectorAdapter {
 public:
  explicit DetectorAdapter(int stop_class_id = kStopClassId,
                           ConfidenceReduction reduction = ConfidenceReduction::Max)
      : stop_class_id_(stop_class_id), reduction_(reduction) {}
  virtual ~DetectorAdapter() = default;

  virtual std::vector<Detection> detect(const Image& image) const = 0;
  virtual double stop_confidence(const Image& image) const;
  virtual bool supports_gradients() const { return false; }
  /// Gradient of upstream * stop_confidence(image) w.r.t. every pixel value.
  virtual Image input_gradient(const Image& image, double upstream) const;
  virtual DetectorInfo info() const = 0;

  int stop_class_id() const noexcept { return stop_class_id_; }
  ConfidenceReduction reduction() const noexcept { return reduction_; }

 protected:
  double reduce(const std::vector<Detection>& detections) const;

 private:
  int stop_class_id_;
  ConfidenceReduction reduction_;
};

/// Fixed confidence for any input; its gradient is identically zero.
class ConstantDetector final : public DetectorAdapter {
 public:
  explicit ConstantDetector(double confidence, int stop_class_id = kStopClassId);

  std::vector<Detection> detect(const Image& image) const override;
  bool supports_gradients() const override { return true; }
  Image input_gradient(const Image& image, double upstream) const override;
  DetectorInfo info() const override;

 private:
  double confidence_;
};

struct ToyDetectorParams {
  int width = 0;
  int height = 0;
  int grid_x = 4;
  int grid_y = 4;
  std::vector<double> weights;  // grid_x * grid_y, row-major over cells
  double bias = 0.0;
  double min_confidence = 0.0;  // detections below this are suppressed
  int stop_class_id = kStopClassId;
};

/// One pooled feature layer, an affine map and a sigmoid. Feature k is the
/// mean of R - (G + B) / 2 over grid cell k.
class ToyDetector final : public DetectorAdapter {
 public:
  explicit ToyDetector(ToyDetectorParams params);

  std::vector<double> features(const Image& image) const;
  double logit(const Image& image) const;

  std::vector<Detection> detect(const Image& image) const override;
  double stop_confidence(const Image& image) const override;
  bool supports_gradients() const override { return true; }
  Image input_gradient(const Image& image, double upstream) const override;
  DetectorInfo info() const override;

  const ToyDetectorParams& params() const noexcept { return params_; }

 private:
  void check_resolution(const Image& image) const;
  int cell_of_x(int x) const noexcept { return x * params_.grid_x / params_.width; }
  int cell_of_y(int y) const noexcept { return y * params_.grid_y / params_.height; }

  ToyDetectorParams params_;
  std::vector<double> cell_area_;
};

struct ToyFitOptions {
  int iterations = 2000;
  double learning_rate = 2.0;
  double l2 = 1e-3;
};

/// L2-regularized logistic regression of STOP presence on the pooled
/// features; labels are 1 (STOP present) or 0.
ToyDetectorParams fit_toy_detector(std::span<const Image> images, std::span<const int> labels,
                                   int grid_x, int grid_y, const ToyFitOptions& options = {});

double sigmoid(double x) noexcept;

/// Latent-to-patch boundary. Patches are square with values in [0,1].
class GeneratorAdapter {
 public:
  virtual ~GeneratorAdapter() = default;

  virtual std::size_t latent_dim() const = 0;
  virtual int patch_side() const = 0;
  virtual int channels() const { return 3; }
  virtual Image generate(std::span<const double> z) const = 0;
  virtual bool supports_gradients() const { return false; }
  /// Vector-Jacobian product: d(sum upstream * G(z)) / dz.
  virtual std::vector<double> latent_gradient(std::span<const double> z, const Image& upstream) const;
  /// Starting latent for an initialization label ("peacock", "dog", ...).
  virtual std::vector<double> initial_latent(std::string_view label, std::uint64_t seed) const;
};

enum class ToyActivation { Linear, Sigmoid };

/// generate(z) = act(B z) reshaped to side x side x channels.
class ToyGenerator final : public GeneratorAdapter {
 public:
  /// Random smooth basis (sums of low-frequency cosines), seeded.
  ToyGenerator(ToyActivation activation, int side, int channels, std::size_t latent_dim,
               std::uint64_t seed);
  /// Explicit row-major basis with side*side*channels rows.
  ToyGenerator(ToyActivation activation, int side, int channels, std::size_t latent_dim,
               std::vector<double> basis);

  std::size_t latent_dim() const override { return latent_dim_; }
  int patch_side() const override { return side_; }
  int channels() const override { return channels_; }
  Image generate(std::span<const double> z) const override;
  bool supports_gradients() const override { return true; }
  std::vector<double> latent_gradient(std::span<const double> z, const Image& upstream) const override;

  ToyActivation activation() const noexcept { return activation_; }
  std::span<const double> basis() const noexcept { return basis_; }

 private:
  void check_latent(std::span<const double> z) const;
  std::vector<double> preactivation(std::span<const double> z) const;

  ToyActivation activation_;
  int side_;
  int channels_;
  std::size_t latent_dim_;
  std::vector<double> basis_;
};

}  // namespace napkit
