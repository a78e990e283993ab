#include "dlma/losses.hpp"

#include <algorithm>
#include <cmath>

#include "dlma/error.hpp"
#include "dlma/ops.hpp"

namespace dlma::nn {
namespace {

double barrier_slope(double c, double q) {
  const double excess = std::abs(c) - q / 2;
  if (excess <= 0.0 || excess >= 1.0 - kBarrierDelta) return 0.0;
  return (c > 0 ? 1.0 : -1.0) / (1.0 - excess);
}

double floored_pow(double v, double g) { return std::pow(std::max(v, kPowerFloor), g); }

}  // namespace

double loss_adv(double d_fake) { return -std::log(d_fake); }

double loss_disc(double d_real, double d_fake) { return -(std::log(d_real) + std::log(1.0 - d_fake)); }

double loss_generator_total(double l_inf, double l_adv, double lambda) { return l_inf + lambda * l_adv; }

double barrier_penalty(double c, double q) {
  const double excess = std::clamp(std::abs(c) - q / 2, 0.0, 1.0 - kBarrierDelta);
  return -std::log1p(-excess);
}

double barrier_residual(double restored, double degraded, double noise, const DegradeParams& p) {
  return p.dim_gain * floored_pow(degraded, p.gamma_ratio) - p.dim_gain * floored_pow(restored, p.gamma_ratio) -
         noise;
}

double loss_linf(const Raster& restored, const TrainingSample& sample) {
  if (!restored.same_shape(sample.degraded)) {
    throw Error(ErrorCode::dimension_mismatch, "restored image does not match the training sample");
  }
  double total = 0.0;
  auto r = restored.data(), d = sample.degraded.data();
  for (std::size_t i = 0; i < r.size(); ++i) {
    total += barrier_penalty(barrier_residual(r[i], d[i], sample.noise_map[i], sample.params), sample.params.q);
  }
  return total;
}

BarrierTarget barrier_target(const std::vector<const TrainingSample*>& batch) {
  if (batch.empty()) throw Error(ErrorCode::invalid_argument, "empty batch");
  const Raster& first = batch.front()->degraded;
  const int n = static_cast<int>(batch.size()), c = first.channels(), h = first.height(), w = first.width();
  BarrierTarget t;
  t.shape = {n, c, h, w};
  t.reference.resize(shape_numel(t.shape));
  for (int s = 0; s < n; ++s) {
    const TrainingSample& smp = *batch[s];
    if (!smp.degraded.same_shape(first)) throw Error(ErrorCode::dimension_mismatch, "batch patches differ in shape");
    t.params.push_back(smp.params);
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t src = smp.degraded.index(y, x, ch);
          t.reference[((static_cast<std::size_t>(s) * c + ch) * h + y) * w + x] =
              smp.params.dim_gain * floored_pow(smp.degraded.data()[src], smp.params.gamma_ratio) -
              smp.noise_map[src];
        }
      }
    }
  }
  return t;
}

Tensor loss_linf(const Tensor& restored, const BarrierTarget& target) {
  if (restored.shape() != target.shape) {
    throw Error(ErrorCode::dimension_mismatch, "restored batch " + shape_string(restored.shape()) +
                                                   " does not match target " + shape_string(target.shape));
  }
  const int n = target.shape[0];
  const std::size_t per = restored.numel() / n;
  auto rd = restored.data();
  double total = 0.0;
  for (int s = 0; s < n; ++s) {
    const DegradeParams& p = target.params[s];
    for (std::size_t i = s * per; i < (s + 1) * per; ++i) {
      total += barrier_penalty(target.reference[i] - p.dim_gain * floored_pow(rd[i], p.gamma_ratio), p.q);
    }
  }
  return Tensor::from_op({1}, {total / n}, {restored}, [target, n, per](Node& self) {
    Node& in = *self.parents[0];
    const double g = self.grad[0] / n;
    for (int s = 0; s < n; ++s) {
      const DegradeParams& p = target.params[s];
      for (std::size_t i = s * per; i < (s + 1) * per; ++i) {
        const double v = in.data[i];
        const double c = target.reference[i] - p.dim_gain * floored_pow(v, p.gamma_ratio);
        const double dc = v > kPowerFloor ? -p.dim_gain * p.gamma_ratio * std::pow(v, p.gamma_ratio - 1.0) : 0.0;
        in.grad[i] += g * barrier_slope(c, p.q) * dc;
      }
    }
  });
}

Tensor loss_adv(const Tensor& d_fake) {
  const std::size_t n = d_fake.numel();
  double total = 0.0;
  for (double d : d_fake.data()) total += loss_adv(d);
  return Tensor::from_op({1}, {total / n}, {d_fake}, [n](Node& self) {
    Node& in = *self.parents[0];
    for (std::size_t i = 0; i < n; ++i) in.grad[i] += -self.grad[0] / (n * in.data[i]);
  });
}

Tensor loss_disc(const Tensor& d_real, const Tensor& d_fake) {
  if (d_real.numel() != d_fake.numel()) throw Error(ErrorCode::dimension_mismatch, "loss_disc batch mismatch");
  const std::size_t n = d_real.numel();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += loss_disc(d_real.data()[i], d_fake.data()[i]);
  return Tensor::from_op({1}, {total / n}, {d_real, d_fake}, [n](Node& self) {
    Node& real = *self.parents[0];
    Node& fake = *self.parents[1];
    const double g = self.grad[0] / n;
    for (std::size_t i = 0; i < n; ++i) {
      if (real.requires_grad) real.grad[i] += -g / real.data[i];
      if (fake.requires_grad) fake.grad[i] += g / (1.0 - fake.data[i]);
    }
  });
}

Tensor loss_generator_total(const Tensor& l_inf, const Tensor& l_adv, double lambda) {
  if (lambda < 0) throw Error(ErrorCode::invalid_argument, "lambda must be non-negative");
  return add(l_inf, scale(l_adv, lambda));
}

}  // namespace dlma::nn
