// seqdiar/optim.hpp

// Copyright 2026  Seqdiar Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "seqdiar/tensor.hpp"

namespace seqdiar {

// Global L2 norm over all parameter gradients.
inline double grad_norm(const std::vector<TensorPtr>& params) {
  double s = 0.0;
  for (const auto& p : params)
    for (double g : p->grad) s += g * g;
  return std::sqrt(s);
}

// Scales all gradients so the global norm is at most max_norm.
// Returns the pre-clip norm.
inline double clip_grad_norm(const std::vector<TensorPtr>& params, double max_norm) {
  const double n = grad_norm(params);
  if (n > max_norm && n > 0.0) {
    const double f = max_norm / n;
    for (const auto& p : params)
      for (double& g : p->grad) g *= f;
  }
  return n;
}

// Adam with bias correction.  Moment buffers are exposed for checkpointing.
class Adam {
 public:
  Adam(std::vector<TensorPtr> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i]->data.size(), 0.0);
      v_[i].assign(params_[i]->data.size(), 0.0);
    }
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  int64_t step_count() const { return t_; }

  // One update from the accumulated gradients.  Parameters whose grad was
  // never allocated (frozen or unused this step) are left untouched, but
  // their moments still exist so freezing and unfreezing round-trips.
  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = *params_[i];
      if (p.grad.empty()) continue;
      double* m = m_[i].data();
      double* v = v_[i].data();
      for (size_t j = 0; j < p.data.size(); ++j) {
        const double g = p.grad[j];
        m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
        v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        p.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void zero_grad() {
    for (const auto& p : params_) p->zero_grad();
  }

  const std::vector<TensorPtr>& params() const { return params_; }

  // Checkpoint access.
  std::vector<std::vector<double>>& moment1() { return m_; }
  std::vector<std::vector<double>>& moment2() { return v_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  std::vector<TensorPtr> params_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Linear warm-up factor: lr * min(1, step / warmup_steps).
inline double warmup_lr(double base_lr, int64_t step, int64_t warmup_steps) {
  if (warmup_steps <= 0) return base_lr;
  const double f = static_cast<double>(step) / static_cast<double>(warmup_steps);
  return base_lr * (f < 1.0 ? f : 1.0);
}

}  // namespace seqdiar
