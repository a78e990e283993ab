#pragma once

#include <vector>

#include "dlma/synth.hpp"
#include "dlma/tensor.hpp"

namespace dlma::nn {

/// Excess beyond the quantization interval is clamped to 1 - kBarrierDelta.
inline constexpr double kBarrierDelta = 1e-6;
/// Floor applied to intensities before raising them to gamma_ratio.
inline constexpr double kPowerFloor = 1e-6;

struct LossBundle {
  double l_inf = 0.0;
  double l_adv = 0.0;
  double l_gen = 0.0;
  double l_disc = 0.0;
};

// ---- scalar forms --------------------------------------------------------

double loss_adv(double d_fake);
double loss_disc(double d_real, double d_fake);
double loss_generator_total(double l_inf, double l_adv, double lambda);

/// -log(1 - min(max(|c| - q/2, 0), 1 - delta)).
double barrier_penalty(double c, double q);

/// C(i) = a J~(i)^g - a J^(i)^g - n(i) with the power base floored.
double barrier_residual(double restored, double degraded, double noise, const DegradeParams& p);

/// Sum of barrier penalties over one sample.
double loss_linf(const Raster& restored, const TrainingSample& sample);

// ---- graph forms (batch means) -------------------------------------------

/// Per-element constants of the barrier loss for a batch laid out (N,C,H,W).
struct BarrierTarget {
  Shape shape;
  std::vector<double> reference;  // a J~^g - n
  std::vector<DegradeParams> params;
};

BarrierTarget barrier_target(const std::vector<const TrainingSample*>& batch);

/// Mean over the batch of the per-sample barrier sum.
Tensor loss_linf(const Tensor& restored, const BarrierTarget& target);
/// Mean of -log d over the batch.
Tensor loss_adv(const Tensor& d_fake);
/// Mean of -[log d_real + log(1 - d_fake)] over the batch.
Tensor loss_disc(const Tensor& d_real, const Tensor& d_fake);
Tensor loss_generator_total(const Tensor& l_inf, const Tensor& l_adv, double lambda);

}  // namespace dlma::nn
