#include "napkit/assets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "napkit/error.hpp"
#include "napkit/rng.hpp"

namespace napkit {

namespace {

void set_rgb(Image& img, int x, int y, double r, double g, double b) {
  img.at(x, y, 0) = r;
  img.at(x, y, 1) = g;
  img.at(x, y, 2) = b;
}

// Distance-like measure for a regular octagon centered at the origin with
// flat edges aligned to the axes: |x|, |y| and (|x|+|y|)/sqrt(2).
double octagon_radius(double x, double y) {
  const double ax = std::abs(x);
  const double ay = std::abs(y);
  return std::max({ax, ay, (ax + ay) / std::numbers::sqrt2});
}

}  // namespace

Image make_stop_sign(int side) {
  if (side < 4) fail(ErrorKind::InvalidArgument, "sign side must be >= 4");
  Image img(side, side, 3, 0.55);
  const double half = 0.5 * side;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double nx = (x + 0.5 - half) / half;
      const double ny = (y + 0.5 - half) / half;
      const double r = octagon_radius(nx, ny);
      if (r > 0.96) continue;
      if (r > 0.86) {
        set_rgb(img, x, y, 0.95, 0.95, 0.95);
      } else if (std::abs(ny) < 0.16 && std::abs(nx) < 0.62) {
        set_rgb(img, x, y, 0.93, 0.93, 0.93);
      } else {
        set_rgb(img, x, y, 0.78, 0.07, 0.09);
      }
    }
  }
  return img;
}

Image make_blue_sign(int side) {
  if (side < 4) fail(ErrorKind::InvalidArgument, "sign side must be >= 4");
  Image img(side, side, 3, 0.55);
  const double half = 0.5 * side;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double nx = (x + 0.5 - half) / half;
      const double ny = (y + 0.5 - half) / half;
      const double r = std::hypot(nx, ny);
      if (r > 0.95) continue;
      if (std::abs(nx) < 0.15 && std::abs(ny) < 0.6) {
        set_rgb(img, x, y, 0.95, 0.95, 0.95);
      } else {
        set_rgb(img, x, y, 0.08, 0.25, 0.72);
      }
    }
  }
  return img;
}

Image make_background(int width, int height, std::uint64_t seed) {
  Image img(width, height, 3);
  Rng rng(seed);
  struct Blob {
    double x, y, radius, r, g, b;
  };
  std::vector<Blob> blobs(6);
  for (auto& bl : blobs) {
    bl = {rng.uniform(0.0, width), rng.uniform(0.45 * height, height), rng.uniform(0.08, 0.25) * width,
          rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12)};
  }
  const double horizon = rng.uniform(0.35, 0.5);
  const double tint = rng.uniform(-0.05, 0.05);
  for (int y = 0; y < height; ++y) {
    const double t = static_cast<double>(y) / height;
    for (int x = 0; x < width; ++x) {
      double r, g, b;
      if (t < horizon) {
        r = 0.62 + 0.2 * t + tint;
        g = 0.68 + 0.2 * t + tint;
        b = 0.80 + 0.1 * t;
      } else {
        r = 0.42 - 0.1 * t + tint;
        g = 0.44 - 0.1 * t + tint;
        b = 0.43 - 0.1 * t;
      }
      for (const auto& bl : blobs) {
        const double d2 = ((x - bl.x) * (x - bl.x) + (y - bl.y) * (y - bl.y)) / (bl.radius * bl.radius);
        const double w = std::exp(-d2);
        r += w * bl.r;
        g += w * bl.g;
        b += w * bl.b;
      }
      set_rgb(img, x, y, std::clamp(r, 0.0, 1.0), std::clamp(g, 0.0, 1.0), std::clamp(b, 0.0, 1.0));
    }
  }
  return img;
}

std::vector<Scene> make_stop_scenes(std::size_t count, int width, int height, std::uint64_t seed,
                                    double min_side, double max_side) {
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    Image img = make_background(width, height, rng.next());
    const int side = std::max(4, static_cast<int>(std::lround(rng.uniform(min_side, max_side) * height)));
    const int left = static_cast<int>(rng.uniform_int(0, width - side));
    const int top = static_cast<int>(rng.uniform_int(0, height - side));
    blit(img, make_stop_sign(side), left, top);
    const BBox box = BBox::from_edges(kStopClassId, static_cast<double>(left) / width,
                                      static_cast<double>(top) / height,
                                      static_cast<double>(left + side) / width,
                                      static_cast<double>(top + side) / height);
    scenes.push_back({std::move(img), box});
  }
  return scenes;
}

ToyDetectorParams fit_default_toy_detector(int width, int height, std::uint64_t seed, std::size_t count) {
  std::vector<Image> images;
  std::vector<int> labels;
  images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed ^ 0x70796465746563ULL, i));
    Image img = make_background(width, height, rng.next());
    const bool positive = i % 2 == 0;
    const int side = std::max(4, static_cast<int>(std::lround(rng.uniform(0.15, 0.7) * height)));
    const int left = static_cast<int>(rng.uniform_int(0, width - side));
    const int top = static_cast<int>(rng.uniform_int(0, height - side));
    if (positive) {
      blit(img, make_stop_sign(side), left, top);
    } else if (i % 4 == 1) {
      blit(img, make_blue_sign(side), left, top);
    }
    images.push_back(std::move(img));
    labels.push_back(positive ? 1 : 0);
  }
  ToyFitOptions options;
  options.iterations = 1500;
  options.learning_rate = 4.0;
  options.l2 = 2e-3;
  return fit_toy_detector(images, labels, 4, 4, options);
}

ToyStack make_toy_stack(std::uint64_t seed, const ToyStackOptions& options) {
  ToyStack stack;
  stack.detector = std::make_shared<const ToyDetector>(
      fit_default_toy_detector(options.width, options.height, derive_seed(seed, 1)));
  stack.generator = std::make_shared<const ToyGenerator>(options.activation, options.patch_side, 3,
                                                         options.latent_dim, derive_seed(seed, 2));
  stack.optimization_set =
      make_stop_scenes(options.optimization_scenes, options.width, options.height, derive_seed(seed, 3));
  stack.held_out = make_stop_scenes(options.held_out_scenes, options.width, options.height, derive_seed(seed, 4));
  stack.placement = options.placement;
  return stack;
}

}  // namespace napkit
