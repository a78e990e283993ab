#pragma once

#include <string>
#include <vector>

#include "dlma/ops.hpp"
#include "dlma/raster.hpp"
#include "dlma/synth.hpp"

namespace dlma::nn {

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct NamedBuffer {
  std::string name;
  std::vector<double>* values;
};

struct BatchNormLayer {
  Tensor gamma;
  Tensor beta;
  RunningStats stats;

  explicit BatchNormLayer(int channels = 0);
  Tensor operator()(const Tensor& x, NormMode mode, bool update_running = true);
  void collect(const std::string& prefix, std::vector<NamedTensor>& params, std::vector<NamedBuffer>& buffers);
};

struct GeneratorConfig {
  int channels = 3;
  int width = 64;
  int residual_units = 16;
  /// Standard deviation of the tail conv's initial weights; 0 starts from J^ = J~.
  double tail_init_std = 0.0;

  void validate() const;
};

/// Head conv, residual units (conv-BN-ReLU-conv-BN plus skip), tail conv
/// producing the residual map. All kernels 3x3, stride 1, padding 1.
class Generator {
 public:
  Generator(const GeneratorConfig& config, Rng& rng);

  const GeneratorConfig& config() const noexcept { return config_; }
  /// Predicted residual, same shape as x.
  Tensor forward(const Tensor& x, NormMode mode, bool update_running = true);
  /// clamp(x + forward(x), 0, 1).
  Tensor restore(const Tensor& x, NormMode mode, bool update_running = true);

  std::vector<NamedTensor> parameters();
  std::vector<NamedBuffer> buffers();

 private:
  struct Unit {
    Tensor w1, w2;
    BatchNormLayer bn1, bn2;
  };
  GeneratorConfig config_;
  Tensor head_w_, head_b_, tail_w_, tail_b_;
  std::vector<Unit> units_;
};

struct DiscriminatorConfig {
  int channels = 3;
  int base_width = 64;
  int patch_height = 32;
  int patch_width = 32;

  void validate() const;
};

/// Four units of conv(3x3, s1)-BN-LReLU then conv(3x3, s2)-BN-LReLU with
/// widths base x {1,2,4,8}, then a dense layer and a sigmoid.
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& config, Rng& rng);

  const DiscriminatorConfig& config() const noexcept { return config_; }
  /// (N,1) probabilities that each image is a properly exposed original.
  Tensor forward(const Tensor& x, NormMode mode, bool update_running = true);

  std::vector<NamedTensor> parameters();
  std::vector<NamedBuffer> buffers();

 private:
  struct Unit {
    Tensor w1, w2;
    BatchNormLayer bn1, bn2;
  };
  DiscriminatorConfig config_;
  std::vector<Unit> units_;
  Tensor dense_w_, dense_b_;
};

inline constexpr double kLeakySlope = 0.2;

/// Stacks equally sized images into an (N,C,H,W) tensor.
Tensor images_to_tensor(const std::vector<const Raster*>& images);
/// Batch item `n` of an (N,C,H,W) tensor, clamped to [0,1].
Raster tensor_to_image(const Tensor& t, int n);

}  // namespace dlma::nn
