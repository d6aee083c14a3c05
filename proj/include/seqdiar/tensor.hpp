// seqdiar/tensor.hpp
//
// Dense float64 tensors with reverse-mode automatic differentiation.
//
// Every differentiable op appends one node to the ambient GradTape as it
// runs, so tape order is creation order and already topological.  backward()
// seeds d(loss)/d(loss) = 1 and replays the tape in reverse, accumulating
// into Tensor::grad for tensors with requires_grad set.  A NoGradGuard
// disables recording for inference paths.
//
// Live element accounting (ElementCounter) underpins the memory benchmark:
// it tracks how many payload elements are currently allocated and the peak
// inside a measurement scope.

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

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "seqdiar/common.hpp"
#include "seqdiar/rng.hpp"

namespace seqdiar {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Counts live tensor payload elements (data + allocated grads) on this
// thread.  begin_scope() rebases the peak so a measurement covers only what
// was allocated inside the scope.
class ElementCounter {
 public:
  static ElementCounter& instance() {
    thread_local ElementCounter c;
    return c;
  }

  void add(int64_t n) {
    live_ += n;
    if (live_ > peak_) peak_ = live_;
  }
  void remove(int64_t n) { live_ -= n; }

  void begin_scope() {
    scope_base_ = live_;
    peak_ = live_;
  }
  // Peak elements allocated above the scope baseline.
  int64_t scope_peak() const { return peak_ - scope_base_; }
  int64_t live() const { return live_; }

 private:
  int64_t live_ = 0;
  int64_t peak_ = 0;
  int64_t scope_base_ = 0;
};

class Tensor {
 public:
  std::vector<int64_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // same size as data once allocated
  bool requires_grad = false;

  ~Tensor() {
    ElementCounter::instance().remove(static_cast<int64_t>(data.size() + grad.size()));
  }

  static TensorPtr create(std::vector<int64_t> shape) {
    auto t = std::make_shared<Tensor>();
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d < 0) throw ShapeError("negative dimension");
      n *= d;
    }
    t->shape = std::move(shape);
    t->data.assign(static_cast<size_t>(n), 0.0);
    ElementCounter::instance().add(n);
    return t;
  }

  static TensorPtr create(std::vector<int64_t> shape, std::vector<double> values) {
    auto t = create(std::move(shape));
    if (values.size() != t->data.size()) throw ShapeError("value count does not match shape");
    t->data = std::move(values);
    return t;
  }

  static TensorPtr full(std::vector<int64_t> shape, double value) {
    auto t = create(std::move(shape));
    std::fill(t->data.begin(), t->data.end(), value);
    return t;
  }

  static TensorPtr scalar(double value) { return create({1}, {value}); }

  static TensorPtr randn(std::vector<int64_t> shape, Rng& rng, double stddev = 1.0) {
    auto t = create(std::move(shape));
    for (auto& v : t->data) v = stddev * rng.normal();
    return t;
  }

  static TensorPtr randu(std::vector<int64_t> shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
    auto t = create(std::move(shape));
    for (auto& v : t->data) v = rng.uniform(lo, hi);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }

  int64_t dim(int i) const {
    if (i < 0 || i >= ndim()) throw ShapeError("dim index out of range");
    return shape[static_cast<size_t>(i)];
  }

  // 2-d element access; hot loops should index data directly.
  double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * shape[1] + c)]; }
  double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * shape[1] + c)]; }

  void ensure_grad() {
    if (grad.size() != data.size()) {
      grad.assign(data.size(), 0.0);
      ElementCounter::instance().add(static_cast<int64_t>(grad.size()));
    }
  }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_shape(a, b))
    throw ShapeError(std::string(op) + ": mismatched shapes " + a.shape_str() + " vs " + b.shape_str());
}

// Tape of backward closures in forward creation order.
class GradTape {
 public:
  static GradTape& active() {
    thread_local GradTape tape;
    return tape;
  }

  bool enabled() const { return enabled_; }
  void set_enabled(bool e) { enabled_ = e; }

  // True when this op should record: tape enabled and some input needs grad.
  template <typename... Ts>
  static bool recording(const Ts&... inputs) {
    return active().enabled_ && (... || inputs->requires_grad);
  }

  void record(const TensorPtr& out, std::function<void()> pull) {
    out->requires_grad = true;
    nodes_.push_back({out, std::move(pull)});
  }

  // Reverse replay from a scalar loss.
  void backward(const TensorPtr& loss) {
    if (loss->numel() != 1) throw ContractError("backward: loss must be a scalar");
    if (replayed_) throw ContractError("backward: tape already replayed; reset() first");
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->out->grad.empty()) continue;  // not on any path to the loss
      it->pull();
    }
    replayed_ = true;
  }

  void reset() {
    nodes_.clear();
    replayed_ = false;
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorPtr out;
    std::function<void()> pull;
  };
  std::vector<Node> nodes_;
  bool enabled_ = true;
  bool replayed_ = false;
};

// RAII recording switch for inference paths.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradTape::active().enabled()) { GradTape::active().set_enabled(false); }
  ~NoGradGuard() { GradTape::active().set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

inline void backward(const TensorPtr& loss) { GradTape::active().backward(loss); }

}  // namespace seqdiar
