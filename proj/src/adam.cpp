#include "dlma/trainer.hpp"

#include <cmath>

namespace dlma {

Adam::Adam(std::vector<nn::NamedTensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    state_.push_back({std::vector<double>(p.tensor->numel(), 0.0), std::vector<double>(p.tensor->numel(), 0.0)});
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor->zero_grad();
}

void Adam::step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto w = params_[k].tensor->data();
    auto g = params_[k].tensor->grad();
    auto& s = state_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      s.m[i] = beta1_ * s.m[i] + (1 - beta1_) * g[i];
      s.v[i] = beta2_ * s.v[i] + (1 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + eps_);
    }
  }
}

}  // namespace dlma
