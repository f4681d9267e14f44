#include "napkit/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "napkit/error.hpp"
#include "napkit/rng.hpp"

namespace napkit {

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double DetectorAdapter::reduce(const std::vector<Detection>& detections) const {
  double best = 0.0;
  double sum = 0.0;
  int n = 0;
  for (const auto& d : detections) {
    if (d.class_id != stop_class_id_) continue;
    best = std::max(best, d.confidence);
    sum += d.confidence;
    ++n;
  }
  if (n == 0) return 0.0;
  return reduction_ == ConfidenceReduction::Max ? best : sum / n;
}

double DetectorAdapter::stop_confidence(const Image& image) const { return reduce(detect(image)); }

Image DetectorAdapter::input_gradient(const Image&, double) const {
  fail(ErrorKind::NoGradientSupport, "detector does not provide input gradients");
}

ConstantDetector::ConstantDetector(double confidence, int stop_class_id)
    : DetectorAdapter(stop_class_id), confidence_(confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    fail(ErrorKind::InvalidArgument, "constant confidence must be in [0,1]");
  }
}

std::vector<Detection> ConstantDetector::detect(const Image&) const {
  return {Detection{BBox{stop_class_id(), 0.5, 0.5, 0.5, 0.5}, stop_class_id(), confidence_}};
}

Image ConstantDetector::input_gradient(const Image& image, double) const {
  return Image(image.width(), image.height(), image.channels());
}

DetectorInfo ConstantDetector::info() const {
  DetectorInfo i;
  i.supports_gradients = true;
  i.class_map = {{stop_class_id(), "stop"}};
  i.confidence_definition = "constant";
  return i;
}

ToyDetector::ToyDetector(ToyDetectorParams params)
    : DetectorAdapter(params.stop_class_id), params_(std::move(params)) {
  if (params_.width <= 0 || params_.height <= 0) {
    fail(ErrorKind::InvalidArgument, "toy detector resolution must be positive");
  }
  if (params_.grid_x <= 0 || params_.grid_y <= 0 || params_.grid_x > params_.width ||
      params_.grid_y > params_.height) {
    fail(ErrorKind::InvalidArgument, "toy detector grid must fit the resolution");
  }
  const std::size_t cells = static_cast<std::size_t>(params_.grid_x * params_.grid_y);
  if (params_.weights.empty()) params_.weights.assign(cells, 0.0);
  if (params_.weights.size() != cells) {
    fail(ErrorKind::DimensionMismatch, "toy detector needs one weight per grid cell");
  }
  cell_area_.assign(cells, 0.0);
  for (int y = 0; y < params_.height; ++y) {
    for (int x = 0; x < params_.width; ++x) {
      cell_area_[static_cast<std::size_t>(cell_of_y(y) * params_.grid_x + cell_of_x(x))] += 1.0;
    }
  }
}

void ToyDetector::check_resolution(const Image& image) const {
  if (image.width() != params_.width || image.height() != params_.height || image.channels() != 3) {
    fail(ErrorKind::ResolutionMismatch,
         "toy detector expects " + std::to_string(params_.width) + "x" + std::to_string(params_.height) +
             " RGB, got " + std::to_string(image.width()) + "x" + std::to_string(image.height()) + "x" +
             std::to_string(image.channels()));
  }
}

std::vector<double> ToyDetector::features(const Image& image) const {
  check_resolution(image);
  std::vector<double> f(cell_area_.size(), 0.0);
  const auto data = image.data();
  std::size_t idx = 0;
  for (int y = 0; y < params_.height; ++y) {
    const int row = cell_of_y(y) * params_.grid_x;
    for (int x = 0; x < params_.width; ++x, idx += 3) {
      f[static_cast<std::size_t>(row + cell_of_x(x))] += data[idx] - 0.5 * (data[idx + 1] + data[idx + 2]);
    }
  }
  for (std::size_t k = 0; k < f.size(); ++k) f[k] /= cell_area_[k];
  return f;
}

double ToyDetector::logit(const Image& image) const {
  const auto f = features(image);
  double s = params_.bias;
  for (std::size_t k = 0; k < f.size(); ++k) s += params_.weights[k] * f[k];
  return s;
}

double ToyDetector::stop_confidence(const Image& image) const {
  const double c = sigmoid(logit(image));
  return c >= params_.min_confidence ? c : 0.0;
}

std::vector<Detection> ToyDetector::detect(const Image& image) const {
  const double c = sigmoid(logit(image));
  if (c < params_.min_confidence) return {};
  return {Detection{BBox{params_.stop_class_id, 0.5, 0.5, 0.5, 0.5}, params_.stop_class_id, c}};
}

Image ToyDetector::input_gradient(const Image& image, double upstream) const {
  const double c = sigmoid(logit(image));
  Image grad(image.width(), image.height(), 3);
  if (c < params_.min_confidence) return grad;
  const double dlogit = upstream * c * (1.0 - c);
  std::vector<double> per_cell(cell_area_.size());
  for (std::size_t k = 0; k < per_cell.size(); ++k) per_cell[k] = dlogit * params_.weights[k] / cell_area_[k];
  auto g = grad.data();
  std::size_t idx = 0;
  for (int y = 0; y < params_.height; ++y) {
    const int row = cell_of_y(y) * params_.grid_x;
    for (int x = 0; x < params_.width; ++x, idx += 3) {
      const double w = per_cell[static_cast<std::size_t>(row + cell_of_x(x))];
      g[idx] = w;
      g[idx + 1] = -0.5 * w;
      g[idx + 2] = -0.5 * w;
    }
  }
  return grad;
}

DetectorInfo ToyDetector::info() const {
  DetectorInfo i;
  i.width = params_.width;
  i.height = params_.height;
  i.supports_gradients = true;
  i.class_map = {{params_.stop_class_id, "stop"}};
  i.confidence_definition = "sigmoid(w . pooled(R - (G+B)/2) + b)";
  return i;
}

ToyDetectorParams fit_toy_detector(std::span<const Image> images, std::span<const int> labels,
                                   int grid_x, int grid_y, const ToyFitOptions& options) {
  if (images.empty()) fail(ErrorKind::EmptyBatch, "no training images for the toy detector");
  if (images.size() != labels.size()) fail(ErrorKind::DimensionMismatch, "one label per image required");
  ToyDetectorParams params;
  params.width = images.front().width();
  params.height = images.front().height();
  params.grid_x = grid_x;
  params.grid_y = grid_y;
  const ToyDetector probe(params);

  std::vector<std::vector<double>> feats;
  feats.reserve(images.size());
  for (const auto& img : images) feats.push_back(probe.features(img));

  const std::size_t dim = feats.front().size();
  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  const double n = static_cast<double>(images.size());
  for (int it = 0; it < options.iterations; ++it) {
    std::vector<double> gw(dim, 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
      double s = b;
      for (std::size_t k = 0; k < dim; ++k) s += w[k] * feats[i][k];
      const double err = sigmoid(s) - static_cast<double>(labels[i] != 0);
      for (std::size_t k = 0; k < dim; ++k) gw[k] += err * feats[i][k];
      gb += err;
    }
    for (std::size_t k = 0; k < dim; ++k) w[k] -= options.learning_rate * (gw[k] / n + options.l2 * w[k]);
    b -= options.learning_rate * gb / n;
  }
  params.weights = std::move(w);
  params.bias = b;
  return params;
}

std::vector<double> GeneratorAdapter::latent_gradient(std::span<const double>, const Image&) const {
  fail(ErrorKind::NoGradientSupport, "generator does not provide latent gradients");
}

std::vector<double> GeneratorAdapter::initial_latent(std::string_view label, std::uint64_t seed) const {
  Rng rng(derive_seed(seed, hash_label(label)));
  std::vector<double> z(latent_dim());
  for (double& v : z) v = rng.normal();
  return z;
}

namespace {

std::vector<double> cosine_basis(int side, int channels, std::size_t latent_dim, std::uint64_t seed) {
  const std::size_t rows = static_cast<std::size_t>(side * side * channels);
  std::vector<double> basis(rows * latent_dim, 0.0);
  Rng rng(seed);
  for (std::size_t j = 0; j < latent_dim; ++j) {
    double fx = static_cast<double>(rng.uniform_int(0, 3));
    double fy = static_cast<double>(rng.uniform_int(0, 3));
    double phase_x = rng.uniform(0.0, std::numbers::pi);
    double phase_y = rng.uniform(0.0, std::numbers::pi);
    double amp[4];
    for (int c = 0; c < channels && c < 4; ++c) amp[c] = 0.6 * rng.normal();
    // The first columns are flat single-channel offsets.
    if (j < static_cast<std::size_t>(channels) && j < 4) {
      fx = fy = phase_x = phase_y = 0.0;
      for (int c = 0; c < channels && c < 4; ++c) amp[c] = static_cast<std::size_t>(c) == j ? 0.6 : 0.0;
    }
    for (int y = 0; y < side; ++y) {
      const double cy = std::cos(std::numbers::pi * fy * (y + 0.5) / side + phase_y);
      for (int x = 0; x < side; ++x) {
        const double cx = std::cos(std::numbers::pi * fx * (x + 0.5) / side + phase_x);
        for (int c = 0; c < channels; ++c) {
          const std::size_t row = static_cast<std::size_t>((y * side + x) * channels + c);
          basis[row * latent_dim + j] = amp[c % 4] * cx * cy;
        }
      }
    }
  }
  return basis;
}

}  // namespace

ToyGenerator::ToyGenerator(ToyActivation activation, int side, int channels, std::size_t latent_dim,
                           std::uint64_t seed)
    : ToyGenerator(activation, side, channels, latent_dim, cosine_basis(side, channels, latent_dim, seed)) {}

ToyGenerator::ToyGenerator(ToyActivation activation, int side, int channels, std::size_t latent_dim,
                           std::vector<double> basis)
    : activation_(activation),
      side_(side),
      channels_(channels),
      latent_dim_(latent_dim),
      basis_(std::move(basis)) {
  if (side <= 0 || channels <= 0 || latent_dim == 0) {
    fail(ErrorKind::InvalidArgument, "toy generator dimensions must be positive");
  }
  if (basis_.size() != static_cast<std::size_t>(side * side * channels) * latent_dim) {
    fail(ErrorKind::DimensionMismatch, "basis must have side*side*channels rows and latent_dim columns");
  }
}

void ToyGenerator::check_latent(std::span<const double> z) const {
  if (z.size() != latent_dim_) {
    fail(ErrorKind::DimensionMismatch,
         "latent has " + std::to_string(z.size()) + " entries, generator expects " + std::to_string(latent_dim_));
  }
}

std::vector<double> ToyGenerator::preactivation(std::span<const double> z) const {
  const std::size_t rows = basis_.size() / latent_dim_;
  std::vector<double> a(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = basis_.data() + r * latent_dim_;
    double s = 0.0;
    for (std::size_t j = 0; j < latent_dim_; ++j) s += row[j] * z[j];
    a[r] = s;
  }
  return a;
}

Image ToyGenerator::generate(std::span<const double> z) const {
  check_latent(z);
  const auto a = preactivation(z);
  Image out(side_, side_, channels_);
  auto d = out.data();
  for (std::size_t r = 0; r < a.size(); ++r) {
    d[r] = activation_ == ToyActivation::Sigmoid ? sigmoid(a[r]) : a[r];
  }
  return out;
}

std::vector<double> ToyGenerator::latent_gradient(std::span<const double> z, const Image& upstream) const {
  check_latent(z);
  if (upstream.width() != side_ || upstream.height() != side_ || upstream.channels() != channels_) {
    fail(ErrorKind::DimensionMismatch, "upstream gradient must match the patch shape");
  }
  const auto g = upstream.data();
  std::vector<double> local(g.begin(), g.end());
  if (activation_ == ToyActivation::Sigmoid) {
    const auto a = preactivation(z);
    for (std::size_t r = 0; r < a.size(); ++r) {
      const double s = sigmoid(a[r]);
      local[r] *= s * (1.0 - s);
    }
  }
  std::vector<double> out(latent_dim_, 0.0);
  for (std::size_t r = 0; r < local.size(); ++r) {
    if (local[r] == 0.0) continue;
    const double* row = basis_.data() + r * latent_dim_;
    for (std::size_t j = 0; j < latent_dim_; ++j) out[j] += row[j] * local[r];
  }
  return out;
}

}  // namespace napkit
