#pragma once

#include <vector>

#include "dlma/tensor.hpp"

namespace dlma::nn {

/// Cross-correlation of x (N,C,H,W) with weight (O,C,k,k); bias (O) may be
/// undefined. Output spatial size is floor((in + 2 pad - k) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding);

enum class NormMode { training, inference };

/// Per-channel running statistics tracked by batchnorm in training mode.
struct RunningStats {
  std::vector<double> mean;
  std::vector<double> var;
  double momentum = 0.1;

  explicit RunningStats(int channels = 0) : mean(channels, 0.0), var(channels, 1.0) {}
};

inline constexpr double kNormEps = 1e-5;

/// Normalizes x (N,C,...) per channel. Training mode uses batch statistics
/// (biased variance) and, when update_running is set, folds them into
/// `stats`; inference mode uses `stats`.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats& stats, NormMode mode,
                 bool update_running = true);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);

/// Flattens x to (N, F) and applies y = x W^T + b with W (O,F), b (O).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// Values clamped to [0,1]; gradient passes where the input lies in [0,1].
Tensor clamp01(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

}  // namespace dlma::nn
