#include "napkit/image.hpp"

#include <algorithm>
#include <cmath>

#include "napkit/error.hpp"

namespace napkit {

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels < 0) {
    fail(ErrorKind::InvalidArgument, "image dimensions must be non-negative");
  }
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                   static_cast<std::size_t>(channels),
               fill);
}

Image Image::from_bytes(int width, int height, int channels,
                        std::span<const std::uint8_t> bytes) {
  Image img(width, height, channels);
  if (bytes.size() != img.size()) {
    fail(ErrorKind::DimensionMismatch, "byte buffer does not match image shape");
  }
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.data_[i] = static_cast<double>(bytes[i]) / 255.0;
  }
  return img;
}

std::vector<std::uint8_t> Image::to_bytes() const {
  std::vector<std::uint8_t> out(data_.size());
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double v = std::floor(data_[i] * 255.0 + 0.5);
    out[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

double sample_bilinear(const Image& img, double u, double v, int c) noexcept {
  const int w = img.width();
  const int h = img.height();
  if (!(u >= 0.0 && v >= 0.0 && u <= w - 1 && v <= h - 1)) return 0.0;
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const double ax = u - x0;
  const double ay = v - y0;
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);

  double top = img.at(x0, y0, c);
  if (ax > 0.0) top = (1.0 - ax) * top + ax * img.at(x1, y0, c);
  if (ay == 0.0) return top;
  double bottom = img.at(x0, y1, c);
  if (ax > 0.0) bottom = (1.0 - ax) * bottom + ax * img.at(x1, y1, c);
  return (1.0 - ay) * top + ay * bottom;
}

namespace {

struct Tap {
  int i0;
  int i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> resize_taps(int src, int dst) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (int i = 0; i < dst; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    taps[static_cast<std::size_t>(i)] = {i0, std::min(i0 + 1, src - 1), s - i0};
  }
  return taps;
}

}  // namespace

Image resize_bilinear(const Image& src, int width, int height) {
  if (src.empty()) fail(ErrorKind::EmptyImage, "cannot resize an empty image");
  if (width <= 0 || height <= 0) {
    fail(ErrorKind::InvalidArgument, "resize target must be positive");
  }
  const auto tx = resize_taps(src.width(), width);
  const auto ty = resize_taps(src.height(), height);
  Image out(width, height, src.channels());
  for (int y = 0; y < height; ++y) {
    const Tap& ry = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      const Tap& rx = tx[static_cast<std::size_t>(x)];
      for (int c = 0; c < src.channels(); ++c) {
        const double top = (1.0 - rx.w1) * src.at(rx.i0, ry.i0, c) + rx.w1 * src.at(rx.i1, ry.i0, c);
        const double bot = (1.0 - rx.w1) * src.at(rx.i0, ry.i1, c) + rx.w1 * src.at(rx.i1, ry.i1, c);
        out.at(x, y, c) = (1.0 - ry.w1) * top + ry.w1 * bot;
      }
    }
  }
  return out;
}

Image resize_bilinear_adjoint(const Image& grad, int src_width, int src_height) {
  if (src_width <= 0 || src_height <= 0) {
    fail(ErrorKind::InvalidArgument, "adjoint source size must be positive");
  }
  const auto tx = resize_taps(src_width, grad.width());
  const auto ty = resize_taps(src_height, grad.height());
  Image out(src_width, src_height, grad.channels());
  for (int y = 0; y < grad.height(); ++y) {
    const Tap& ry = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < grad.width(); ++x) {
      const Tap& rx = tx[static_cast<std::size_t>(x)];
      for (int c = 0; c < grad.channels(); ++c) {
        const double g = grad.at(x, y, c);
        if (g == 0.0) continue;
        out.at(rx.i0, ry.i0, c) += (1.0 - rx.w1) * (1.0 - ry.w1) * g;
        out.at(rx.i1, ry.i0, c) += rx.w1 * (1.0 - ry.w1) * g;
        out.at(rx.i0, ry.i1, c) += (1.0 - rx.w1) * ry.w1 * g;
        out.at(rx.i1, ry.i1, c) += rx.w1 * ry.w1 * g;
      }
    }
  }
  return out;
}

void blit(Image& dst, const Image& src, int left, int top) {
  if (dst.channels() != src.channels()) {
    fail(ErrorKind::DimensionMismatch, "blit channel count mismatch");
  }
  const int x_begin = std::max(0, -left);
  const int y_begin = std::max(0, -top);
  const int x_end = std::min(src.width(), dst.width() - left);
  const int y_end = std::min(src.height(), dst.height() - top);
  for (int y = y_begin; y < y_end; ++y) {
    for (int x = x_begin; x < x_end; ++x) {
      for (int c = 0; c < src.channels(); ++c) {
        dst.at(left + x, top + y, c) = src.at(x, y, c);
      }
    }
  }
}

void clamp_values(Image& img, double lo, double hi) noexcept {
  for (double& v : img.data()) v = std::clamp(v, lo, hi);
}

}  // namespace napkit
