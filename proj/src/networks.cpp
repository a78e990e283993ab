#include "dlma/networks.hpp"

#include <algorithm>
#include <cmath>

#include "dlma/error.hpp"

namespace dlma::nn {
namespace {

Tensor kaiming(Shape shape, int fan_in, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = normal(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor conv_weight(int out, int in, int k, Rng& rng) { return kaiming({out, in, k, k}, in * k * k, rng); }

Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0, true); }

}  // namespace

BatchNormLayer::BatchNormLayer(int channels)
    : gamma({channels}, 1.0, true), beta({channels}, 0.0, true), stats(channels) {}

Tensor BatchNormLayer::operator()(const Tensor& x, NormMode mode, bool update_running) {
  return batchnorm(x, gamma, beta, stats, mode, update_running);
}

void BatchNormLayer::collect(const std::string& prefix, std::vector<NamedTensor>& params,
                             std::vector<NamedBuffer>& buffers) {
  params.push_back({prefix + ".gamma", &gamma});
  params.push_back({prefix + ".beta", &beta});
  buffers.push_back({prefix + ".running_mean", &stats.mean});
  buffers.push_back({prefix + ".running_var", &stats.var});
}

void GeneratorConfig::validate() const {
  if (channels != 1 && channels != 3) throw Error(ErrorCode::invalid_argument, "generator channels must be 1 or 3");
  if (width < 1) throw Error(ErrorCode::invalid_argument, "generator width must be positive");
  if (residual_units < 0) throw Error(ErrorCode::invalid_argument, "residual_units must be non-negative");
  if (!(tail_init_std >= 0)) throw Error(ErrorCode::invalid_argument, "tail_init_std must be non-negative");
}

Generator::Generator(const GeneratorConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const int c = config_.channels, f = config_.width;
  head_w_ = conv_weight(f, c, 3, rng);
  head_b_ = zeros({f});
  for (int u = 0; u < config_.residual_units; ++u) {
    Unit unit{conv_weight(f, f, 3, rng), conv_weight(f, f, 3, rng), BatchNormLayer(f), BatchNormLayer(f)};
    units_.push_back(std::move(unit));
  }
  tail_w_ = zeros({c, f, 3, 3});
  if (config_.tail_init_std > 0) {
    std::normal_distribution<double> normal(0.0, config_.tail_init_std);
    for (double& v : tail_w_.data()) v = normal(rng);
  }
  tail_b_ = zeros({c});
}

Tensor Generator::forward(const Tensor& x, NormMode mode, bool update_running) {
  if (x.rank() != 4 || x.dim(1) != config_.channels) {
    throw Error(ErrorCode::dimension_mismatch, "generator expects (N," + std::to_string(config_.channels) +
                                                   ",H,W), got " + shape_string(x.shape()));
  }
  Tensor h = conv2d(x, head_w_, head_b_, 1, 1);
  for (Unit& u : units_) {
    Tensor y = relu(u.bn1(conv2d(h, u.w1, Tensor(), 1, 1), mode, update_running));
    y = u.bn2(conv2d(y, u.w2, Tensor(), 1, 1), mode, update_running);
    h = add(h, y);
  }
  return conv2d(h, tail_w_, tail_b_, 1, 1);
}

Tensor Generator::restore(const Tensor& x, NormMode mode, bool update_running) {
  return clamp01(add(x, forward(x, mode, update_running)));
}

std::vector<NamedTensor> Generator::parameters() {
  std::vector<NamedTensor> p{{"g.head.w", &head_w_}, {"g.head.b", &head_b_}};
  std::vector<NamedBuffer> unused;
  for (std::size_t u = 0; u < units_.size(); ++u) {
    const std::string pre = "g.unit" + std::to_string(u);
    p.push_back({pre + ".conv1.w", &units_[u].w1});
    units_[u].bn1.collect(pre + ".bn1", p, unused);
    p.push_back({pre + ".conv2.w", &units_[u].w2});
    units_[u].bn2.collect(pre + ".bn2", p, unused);
  }
  p.push_back({"g.tail.w", &tail_w_});
  p.push_back({"g.tail.b", &tail_b_});
  return p;
}

std::vector<NamedBuffer> Generator::buffers() {
  std::vector<NamedTensor> unused;
  std::vector<NamedBuffer> b;
  for (std::size_t u = 0; u < units_.size(); ++u) {
    const std::string pre = "g.unit" + std::to_string(u);
    units_[u].bn1.collect(pre + ".bn1", unused, b);
    units_[u].bn2.collect(pre + ".bn2", unused, b);
  }
  return b;
}

void DiscriminatorConfig::validate() const {
  if (channels != 1 && channels != 3) throw Error(ErrorCode::invalid_argument, "discriminator channels must be 1 or 3");
  if (base_width < 1) throw Error(ErrorCode::invalid_argument, "discriminator width must be positive");
  if (patch_height < 1 || patch_width < 1) throw Error(ErrorCode::invalid_argument, "patch size must be positive");
}

namespace {
int halve(int v) { return (v - 1) / 2 + 1; }  // 3x3 kernel, stride 2, padding 1
}  // namespace

Discriminator::Discriminator(const DiscriminatorConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  int in = config_.channels, h = config_.patch_height, w = config_.patch_width;
  for (int u = 0; u < 4; ++u) {
    const int f = config_.base_width << u;
    Unit unit{conv_weight(f, in, 3, rng), conv_weight(f, f, 3, rng), BatchNormLayer(f), BatchNormLayer(f)};
    units_.push_back(std::move(unit));
    in = f;
    h = halve(h);
    w = halve(w);
  }
  const int features = in * h * w;
  dense_w_ = kaiming({1, features}, features, rng);
  dense_b_ = zeros({1});
}

Tensor Discriminator::forward(const Tensor& x, NormMode mode, bool update_running) {
  if (x.rank() != 4 || x.dim(1) != config_.channels || x.dim(2) != config_.patch_height ||
      x.dim(3) != config_.patch_width) {
    throw Error(ErrorCode::dimension_mismatch,
                "discriminator expects (N," + std::to_string(config_.channels) + "," +
                    std::to_string(config_.patch_height) + "," + std::to_string(config_.patch_width) + "), got " +
                    shape_string(x.shape()));
  }
  Tensor h = x;
  for (Unit& u : units_) {
    h = leaky_relu(u.bn1(conv2d(h, u.w1, Tensor(), 1, 1), mode, update_running), kLeakySlope);
    h = leaky_relu(u.bn2(conv2d(h, u.w2, Tensor(), 2, 1), mode, update_running), kLeakySlope);
  }
  return sigmoid(linear(h, dense_w_, dense_b_));
}

std::vector<NamedTensor> Discriminator::parameters() {
  std::vector<NamedTensor> p;
  std::vector<NamedBuffer> unused;
  for (std::size_t u = 0; u < units_.size(); ++u) {
    const std::string pre = "d.unit" + std::to_string(u);
    p.push_back({pre + ".conv1.w", &units_[u].w1});
    units_[u].bn1.collect(pre + ".bn1", p, unused);
    p.push_back({pre + ".conv2.w", &units_[u].w2});
    units_[u].bn2.collect(pre + ".bn2", p, unused);
  }
  p.push_back({"d.dense.w", &dense_w_});
  p.push_back({"d.dense.b", &dense_b_});
  return p;
}

std::vector<NamedBuffer> Discriminator::buffers() {
  std::vector<NamedTensor> unused;
  std::vector<NamedBuffer> b;
  for (std::size_t u = 0; u < units_.size(); ++u) {
    const std::string pre = "d.unit" + std::to_string(u);
    units_[u].bn1.collect(pre + ".bn1", unused, b);
    units_[u].bn2.collect(pre + ".bn2", unused, b);
  }
  return b;
}

Tensor images_to_tensor(const std::vector<const Raster*>& images) {
  if (images.empty()) throw Error(ErrorCode::invalid_argument, "no images to stack");
  const Raster& first = *images.front();
  const int n = static_cast<int>(images.size()), c = first.channels(), h = first.height(), w = first.width();
  std::vector<double> v(static_cast<std::size_t>(n) * c * h * w);
  for (int s = 0; s < n; ++s) {
    if (!images[s]->same_shape(first)) throw Error(ErrorCode::dimension_mismatch, "stacked images differ in shape");
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) v[((static_cast<std::size_t>(s) * c + ch) * h + y) * w + x] = images[s]->at(y, x, ch);
      }
    }
  }
  return Tensor({n, c, h, w}, std::move(v));
}

Raster tensor_to_image(const Tensor& t, int n) {
  if (t.rank() != 4 || n < 0 || n >= t.dim(0)) throw Error(ErrorCode::dimension_mismatch, "bad tensor image index");
  const int c = t.dim(1), h = t.dim(2), w = t.dim(3);
  Raster out(h, w, c);
  auto d = t.data();
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.at(y, x, ch) = std::clamp(d[((static_cast<std::size_t>(n) * c + ch) * h + y) * w + x], 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace dlma::nn
