#include "dlma/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dlma/error.hpp"

namespace dlma {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::unsupported_format: return "unsupported-format";
    case ErrorCode::unsupported_depth: return "unsupported-depth";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::corrupt: return "corrupt";
    case ErrorCode::version_mismatch: return "version-mismatch";
    case ErrorCode::solver_failure: return "solver-failure";
    case ErrorCode::non_finite: return "non-finite";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

void QuantSpec::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw Error(ErrorCode::invalid_argument, "quantization step must be positive");
  }
}

double quantize(double x, double q) {
  const double steps = std::floor(x / q + 0.5);
  // For q = 1/L with integral L, return steps / L: the same value as q * steps
  // but correctly rounded, so 8-bit codes k map to exactly k / 255.
  const double levels = std::round(1.0 / q);
  if (std::abs(levels * q - 1.0) <= 1e-12) return steps / levels;
  return q * steps;
}

namespace {

void check_dims(int height, int width, int channels) {
  if (height < 0 || width < 0 || (channels != 1 && channels != 3)) {
    throw Error(ErrorCode::invalid_argument,
                "bad raster shape " + std::to_string(height) + "x" + std::to_string(width) + "x" +
                    std::to_string(channels));
  }
}

}  // namespace

Raster::Raster(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  if (!(fill >= 0.0 && fill <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "raster fill value outside [0,1]");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Raster::Raster(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw Error(ErrorCode::dimension_mismatch, "raster data length does not match its shape");
  }
  if (!in_range()) {
    throw Error(ErrorCode::invalid_argument, "raster values must lie in [0,1]");
  }
}

bool Raster::in_range() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

Raster Raster::crop(int y0, int x0, int h, int w) const {
  if (y0 < 0 || x0 < 0 || h < 0 || w < 0 || y0 + h > height_ || x0 + w > width_) {
    throw Error(ErrorCode::dimension_mismatch, "crop window outside the raster");
  }
  Raster out(h, w, channels_);
  for (int y = 0; y < h; ++y) {
    auto src = data_.begin() + static_cast<std::ptrdiff_t>(index(y0 + y, x0));
    std::copy(src, src + static_cast<std::ptrdiff_t>(w) * channels_,
              out.data_.begin() + static_cast<std::ptrdiff_t>(out.index(y, 0)));
  }
  return out;
}

Raster quantize(const Raster& r, double q) {
  QuantSpec{q}.validate();
  Raster out = r;
  for (double& v : out.data()) v = std::clamp(quantize(v, q), 0.0, 1.0);
  return out;
}

Raster clamp01(Raster r) {
  for (double& v : r.data()) v = std::clamp(v, 0.0, 1.0);
  return r;
}

LumaSplit split_luma(const Raster& r) {
  const int c = r.channels();
  Raster luma(r.height(), r.width(), 1);
  Raster ratios(r.height(), r.width(), c, 1.0);
  auto src = r.data();
  auto l = luma.data();
  auto ratio = ratios.data();
  for (std::size_t p = 0; p < r.pixel_count(); ++p) {
    double m = 0.0;
    for (int k = 0; k < c; ++k) m = std::max(m, src[p * c + k]);
    l[p] = m;
    if (m < kDivideGuard) continue;  // neutral ratios for near-black pixels
    for (int k = 0; k < c; ++k) ratio[p * c + k] = src[p * c + k] / m;
  }
  return {std::move(luma), std::move(ratios)};
}

Raster recombine_luma(const Raster& luma, const Raster& ratios) {
  if (luma.channels() != 1 || luma.height() != ratios.height() || luma.width() != ratios.width()) {
    throw Error(ErrorCode::dimension_mismatch, "luma and ratio maps disagree in shape");
  }
  const int c = ratios.channels();
  Raster out(ratios.height(), ratios.width(), c);
  auto l = luma.data();
  auto ratio = ratios.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < luma.pixel_count(); ++p) {
    for (int k = 0; k < c; ++k) dst[p * c + k] = std::clamp(l[p] * ratio[p * c + k], 0.0, 1.0);
  }
  return out;
}

double mean_squared_error(const Raster& a, const Raster& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::dimension_mismatch, "PSNR of differently shaped images");
  if (a.empty()) throw Error(ErrorCode::dimension_mismatch, "PSNR of empty images");
  double acc = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double psnr(const Raster& a, const Raster& b) {
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace dlma
