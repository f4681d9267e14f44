#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace napkit {

/// Interleaved floating-point image. Scene images and patches both carry
/// channel values in [0,1]; 8-bit data maps through v = byte / 255.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);

  static Image from_bytes(int width, int height, int channels,
                          std::span<const std::uint8_t> bytes);
  /// Round-half-up quantization to 8 bits with clamping.
  std::vector<std::uint8_t> to_bytes() const;

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

  double& at(int x, int y, int c) noexcept { return data_[index(x, y, c)]; }
  double at(int x, int y, int c) const noexcept { return data_[index(x, y, c)]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Bilinear sample at pixel-center coordinates (u, v); pixel (i, j) has its
/// center at (i, j). Locations outside [0, w-1] x [0, h-1] read as zero.
double sample_bilinear(const Image& img, double u, double v, int c) noexcept;

/// Bilinear resize with half-pixel-center alignment and edge clamping.
Image resize_bilinear(const Image& src, int width, int height);

/// Adjoint of resize_bilinear: scatters a gradient on the resized image back
/// onto the source grid of size (src_width, src_height).
Image resize_bilinear_adjoint(const Image& grad, int src_width, int src_height);

/// Copy `src` into `dst` with its top-left corner at (left, top); pixels that
/// fall outside `dst` are dropped.
void blit(Image& dst, const Image& src, int left, int top);

/// Clamp every channel value into [lo, hi].
void clamp_values(Image& img, double lo = 0.0, double hi = 1.0) noexcept;

}  // namespace napkit
