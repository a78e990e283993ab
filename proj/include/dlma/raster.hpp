#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace dlma {

/// Divide guard shared by chroma splitting and LAIC gains: half an 8-bit code step.
inline constexpr double kDivideGuard = 1.0 / 510.0;

/// Quantization step q of the uniform quantizer.
struct QuantSpec {
  double step = 1.0 / 255.0;

  /// Throws Error(invalid_argument) unless step > 0.
  void validate() const;
};

/// q * floor(x / q + 0.5). Ties round up.
double quantize(double x, double q);

/// H x W x C image with real channel values in [0,1], row-major and
/// channel-interleaved.
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, int channels, double fill = 0.0);
  /// Takes ownership of `data`; throws if the size or value range is wrong.
  Raster(int height, int width, int channels, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  double at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }
  double& at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool same_shape(const Raster& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  /// True when every value lies in [0,1].
  bool in_range() const noexcept;

  /// Crop a h x w window whose top-left corner is (y0, x0).
  Raster crop(int y0, int x0, int h, int w) const;

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// A raster-shaped map of signed reals (residuals, noise maps).
struct SignedField {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;
};

Raster quantize(const Raster& r, double q);
Raster clamp01(Raster r);

/// Per-pixel value channel (max over channels) and channel ratios against it.
struct LumaSplit {
  Raster luma;
  Raster ratios;  // same shape as the source; 1 for pixels darker than kDivideGuard
};

LumaSplit split_luma(const Raster& r);
/// Inverse of split_luma for an arbitrary (e.g. tone-mapped) luma; result clamped to [0,1].
Raster recombine_luma(const Raster& luma, const Raster& ratios);

/// 10 log10(1 / MSE); +infinity for identical images.
double psnr(const Raster& a, const Raster& b);
double mean_squared_error(const Raster& a, const Raster& b);

}  // namespace dlma
