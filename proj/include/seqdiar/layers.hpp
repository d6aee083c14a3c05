// seqdiar/layers.hpp
//
// Small parameterised building blocks over the op layer, plus the parameter
// registry used for checkpointing and optimiser construction.

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

#include <string>
#include <utility>
#include <vector>

#include "seqdiar/ops.hpp"
#include "seqdiar/rng.hpp"
#include "seqdiar/tensor.hpp"

namespace seqdiar {

// Ordered name -> tensor registry.  Order is the module traversal order, so
// optimiser state lines up across save/load.
struct ParamMap {
  std::vector<std::pair<std::string, TensorPtr>> items;

  void add(const std::string& name, const TensorPtr& t) {
    for (const auto& [n, _] : items)
      if (n == name) throw ContractError("ParamMap: duplicate name " + name);
    items.emplace_back(name, t);
  }

  TensorPtr find(const std::string& name) const {
    for (const auto& [n, t] : items)
      if (n == name) return t;
    return nullptr;
  }

  std::vector<TensorPtr> tensors() const {
    std::vector<TensorPtr> out;
    out.reserve(items.size());
    for (const auto& [_, t] : items) out.push_back(t);
    return out;
  }

  int64_t total_elements() const {
    int64_t n = 0;
    for (const auto& [_, t] : items) n += t->numel();
    return n;
  }
};

// Forward-pass mode: training toggles dropout, rng drives it.
struct RunContext {
  bool training = false;
  Rng* rng = nullptr;
};

class LinearLayer {
 public:
  TensorPtr w, b;

  LinearLayer() = default;
  LinearLayer(int64_t in, int64_t out, Rng& rng) {
    w = Tensor::randn({out, in}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    b = Tensor::create({out});
    w->requires_grad = b->requires_grad = true;
  }

  TensorPtr forward(const TensorPtr& x) const { return linear(x, w, b); }

  void collect(const std::string& prefix, ParamMap& pm) const {
    pm.add(prefix + ".w", w);
    pm.add(prefix + ".b", b);
  }
};

class LayerNormLayer {
 public:
  TensorPtr gamma, beta;

  LayerNormLayer() = default;
  explicit LayerNormLayer(int64_t dim) {
    gamma = Tensor::full({dim}, 1.0);
    beta = Tensor::create({dim});
    gamma->requires_grad = beta->requires_grad = true;
  }

  TensorPtr forward(const TensorPtr& x) const { return layer_norm(x, gamma, beta); }

  void collect(const std::string& prefix, ParamMap& pm) const {
    pm.add(prefix + ".gamma", gamma);
    pm.add(prefix + ".beta", beta);
  }
};

inline void set_trainable(ParamMap& pm, bool trainable) {
  for (auto& [_, t] : pm.items) t->requires_grad = trainable;
}

}  // namespace seqdiar
