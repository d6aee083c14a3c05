// seqdiar/gradcheck.hpp
//
// Central finite-difference verification of reverse-mode gradients.

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
#include <functional>
#include <string>
#include <vector>

#include "seqdiar/ops.hpp"
#include "seqdiar/rng.hpp"
#include "seqdiar/tensor.hpp"

namespace seqdiar {

struct GradCheckReport {
  double max_rel_err = 0.0;  // worst |analytic - numeric| / max(1, |a|, |n|)
  int64_t checked = 0;
  bool ok(double tol = 1e-4) const { return checked > 0 && max_rel_err < tol; }
};

// Compares tape gradients of f() (a scalar loss built from params) against
// central differences.  When sample_per_param > 0, only that many entries of
// each parameter are probed (deterministically), which keeps whole-model
// checks cheap.
inline GradCheckReport finite_diff_check(const std::vector<TensorPtr>& params,
                                         const std::function<TensorPtr()>& f, double h = 1e-5,
                                         int64_t sample_per_param = 0, uint64_t sample_seed = 7) {
  auto& tape = GradTape::active();
  tape.reset();
  for (const auto& p : params) {
    p->requires_grad = true;
    p->grad.clear();
  }
  TensorPtr loss = f();
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    p->ensure_grad();
    analytic.push_back(p->grad);
  }
  tape.reset();

  GradCheckReport rep;
  Rng pick(sample_seed);
  NoGradGuard ng;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    std::vector<int64_t> idx;
    if (sample_per_param > 0 && p.numel() > sample_per_param) {
      for (int64_t s = 0; s < sample_per_param; ++s)
        idx.push_back(pick.uniform_int(0, p.numel() - 1));
    } else {
      for (int64_t s = 0; s < p.numel(); ++s) idx.push_back(s);
    }
    for (int64_t i : idx) {
      const double orig = p.data[static_cast<size_t>(i)];
      p.data[static_cast<size_t>(i)] = orig + h;
      const double fp = f()->data[0];
      p.data[static_cast<size_t>(i)] = orig - h;
      const double fm = f()->data[0];
      p.data[static_cast<size_t>(i)] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi][static_cast<size_t>(i)];
      const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      rep.max_rel_err = std::max(rep.max_rel_err, std::fabs(a - numeric) / denom);
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace seqdiar
