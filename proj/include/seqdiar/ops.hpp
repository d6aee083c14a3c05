// seqdiar/ops.hpp
//
// Differentiable operations on float64 tensors.  Each op computes its output
// eagerly and, when the ambient tape is recording and an input requires
// grad, registers a pull closure that routes d(loss)/d(out) into the inputs.
//
// Reductions marked order-invariant accumulate addends in sorted order so
// the result is bit-identical under any permutation of the addends.  The
// attention op exposes this for the speaker axis, where slot order must not
// leak into the output even at the last bit.

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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "seqdiar/tensor.hpp"

namespace seqdiar {

// Sum of addends in ascending value order; invariant to input permutation.
inline double ordered_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

// ---------------------------------------------------------------------------
// Elementwise and affine ops
// ---------------------------------------------------------------------------

inline TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(*a, *b, "add");
  auto out = Tensor::create(a->shape);
  const int64_t n = out->numel();
  for (int64_t i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[i];
  if (GradTape::recording(a, b)) {
    GradTape::active().record(out, [a, b, out] {
      const auto& g = out->grad;
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) b->grad[i] += g[i];
      }
    });
  }
  return out;
}

inline TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(*a, *b, "sub");
  auto out = Tensor::create(a->shape);
  const int64_t n = out->numel();
  for (int64_t i = 0; i < n; ++i) out->data[i] = a->data[i] - b->data[i];
  if (GradTape::recording(a, b)) {
    GradTape::active().record(out, [a, b, out] {
      const auto& g = out->grad;
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) b->grad[i] -= g[i];
      }
    });
  }
  return out;
}

inline TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(*a, *b, "mul");
  auto out = Tensor::create(a->shape);
  const int64_t n = out->numel();
  for (int64_t i = 0; i < n; ++i) out->data[i] = a->data[i] * b->data[i];
  if (GradTape::recording(a, b)) {
    GradTape::active().record(out, [a, b, out] {
      const auto& g = out->grad;
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i] * b->data[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) b->grad[i] += g[i] * a->data[i];
      }
    });
  }
  return out;
}

inline TensorPtr scale(const TensorPtr& a, double c) {
  auto out = Tensor::create(a->shape);
  const int64_t n = out->numel();
  for (int64_t i = 0; i < n; ++i) out->data[i] = c * a->data[i];
  if (GradTape::recording(a)) {
    GradTape::active().record(out, [a, out, c] {
      if (!a->requires_grad) return;
      a->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += c * out->grad[i];
    });
  }
  return out;
}

// x[m x n] + row vector b[n], broadcast over rows.
inline TensorPtr add_rowvec(const TensorPtr& x, const TensorPtr& b) {
  if (x->ndim() != 2 || b->ndim() != 1 || b->dim(0) != x->dim(1))
    throw ShapeError("add_rowvec: need x[m x n], b[n]");
  const int64_t m = x->dim(0), n = x->dim(1);
  auto out = Tensor::create({m, n});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out->data[i * n + j] = x->data[i * n + j] + b->data[j];
  if (GradTape::recording(x, b)) {
    GradTape::active().record(out, [x, b, out, m, n] {
      const auto& g = out->grad;
      if (x->requires_grad) {
        x->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) x->grad[i] += g[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < n; ++j) b->grad[j] += g[static_cast<size_t>(i * n + j)];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

inline TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->ndim() != 2 || b->ndim() != 2 || a->dim(1) != b->dim(0))
    throw ShapeError("matmul: " + a->shape_str() + " x " + b->shape_str());
  const int64_t m = a->dim(0), kk = a->dim(1), n = b->dim(1);
  auto out = Tensor::create({m, n});
  const double* pa = a->data.data();
  const double* pb = b->data.data();
  double* po = out->data.data();
  for (int64_t i = 0; i < m; ++i) {
    double* orow = po + i * n;
    for (int64_t k = 0; k < kk; ++k) {
      const double av = pa[i * kk + k];
      if (av == 0.0) continue;
      const double* brow = pb + k * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  if (GradTape::recording(a, b)) {
    GradTape::active().record(out, [a, b, out, m, kk, n] {
      const double* g = out->grad.data();
      if (a->requires_grad) {
        a->ensure_grad();
        // dA = g . B^T
        for (int64_t i = 0; i < m; ++i)
          for (int64_t k = 0; k < kk; ++k) {
            double s = 0.0;
            const double* grow = g + i * n;
            const double* brow = b->data.data() + k * n;
            for (int64_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            a->grad[static_cast<size_t>(i * kk + k)] += s;
          }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        // dB = A^T . g
        for (int64_t k = 0; k < kk; ++k)
          for (int64_t i = 0; i < m; ++i) {
            const double av = a->data[static_cast<size_t>(i * kk + k)];
            if (av == 0.0) continue;
            const double* grow = g + i * n;
            double* brow = b->grad.data() + k * n;
            for (int64_t j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
      }
    });
  }
  return out;
}

// y = x . W^T + bias, with W stored [out_dim x in_dim].  Avoids materialising
// W^T on the forward path.
inline TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias) {
  if (x->ndim() != 2 || w->ndim() != 2 || x->dim(1) != w->dim(1))
    throw ShapeError("linear: " + x->shape_str() + " with W " + w->shape_str());
  const int64_t m = x->dim(0), in = x->dim(1), out_dim = w->dim(0);
  if (bias && (bias->ndim() != 1 || bias->dim(0) != out_dim))
    throw ShapeError("linear: bias shape");
  auto out = Tensor::create({m, out_dim});
  const double* px = x->data.data();
  const double* pw = w->data.data();
  double* po = out->data.data();
  for (int64_t i = 0; i < m; ++i) {
    const double* xrow = px + i * in;
    double* orow = po + i * out_dim;
    for (int64_t o = 0; o < out_dim; ++o) {
      const double* wrow = pw + o * in;
      double s = bias ? bias->data[static_cast<size_t>(o)] : 0.0;
      for (int64_t kidx = 0; kidx < in; ++kidx) s += xrow[kidx] * wrow[kidx];
      orow[o] = s;
    }
  }
  const bool rec = bias ? GradTape::recording(x, w, bias) : GradTape::recording(x, w);
  if (rec) {
    GradTape::active().record(out, [x, w, bias, out, m, in, out_dim] {
      const double* g = out->grad.data();
      if (x->requires_grad) {
        x->ensure_grad();
        for (int64_t i = 0; i < m; ++i) {
          const double* grow = g + i * out_dim;
          double* dxrow = x->grad.data() + i * in;
          for (int64_t o = 0; o < out_dim; ++o) {
            const double gv = grow[o];
            if (gv == 0.0) continue;
            const double* wrow = w->data.data() + o * in;
            for (int64_t kidx = 0; kidx < in; ++kidx) dxrow[kidx] += gv * wrow[kidx];
          }
        }
      }
      if (w->requires_grad) {
        w->ensure_grad();
        for (int64_t i = 0; i < m; ++i) {
          const double* grow = g + i * out_dim;
          const double* xrow = x->data.data() + i * in;
          for (int64_t o = 0; o < out_dim; ++o) {
            const double gv = grow[o];
            if (gv == 0.0) continue;
            double* dwrow = w->grad.data() + o * in;
            for (int64_t kidx = 0; kidx < in; ++kidx) dwrow[kidx] += gv * xrow[kidx];
          }
        }
      }
      if (bias && bias->requires_grad) {
        bias->ensure_grad();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t o = 0; o < out_dim; ++o)
            bias->grad[static_cast<size_t>(o)] += g[i * out_dim + o];
      }
    });
  }
  return out;
}

inline TensorPtr transpose(const TensorPtr& x) {
  if (x->ndim() != 2) throw ShapeError("transpose: need 2-d tensor");
  const int64_t m = x->dim(0), n = x->dim(1);
  auto out = Tensor::create({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out->data[j * m + i] = x->data[i * n + j];
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out, m, n] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) x->grad[static_cast<size_t>(i * n + j)] += out->grad[static_cast<size_t>(j * m + i)];
    });
  }
  return out;
}

inline TensorPtr reshape(const TensorPtr& x, std::vector<int64_t> shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  if (n != x->numel()) throw ShapeError("reshape: element count mismatch");
  auto out = Tensor::create(std::move(shape));
  out->data = x->data;
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Slicing / concatenation
// ---------------------------------------------------------------------------

inline TensorPtr slice_rows(const TensorPtr& x, int64_t r0, int64_t r1) {
  if (x->ndim() != 2) throw ShapeError("slice_rows: need 2-d tensor");
  if (r0 < 0 || r1 < r0 || r1 > x->dim(0)) throw ShapeError("slice_rows: bad range");
  const int64_t n = x->dim(1);
  auto out = Tensor::create({r1 - r0, n});
  std::copy(x->data.begin() + r0 * n, x->data.begin() + r1 * n, out->data.begin());
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out, r0, n] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i)
        x->grad[static_cast<size_t>(r0 * n) + i] += out->grad[i];
    });
  }
  return out;
}

inline TensorPtr slice_cols(const TensorPtr& x, int64_t c0, int64_t c1) {
  if (x->ndim() != 2) throw ShapeError("slice_cols: need 2-d tensor");
  if (c0 < 0 || c1 < c0 || c1 > x->dim(1)) throw ShapeError("slice_cols: bad range");
  const int64_t m = x->dim(0), n = x->dim(1), w = c1 - c0;
  auto out = Tensor::create({m, w});
  for (int64_t i = 0; i < m; ++i)
    std::copy(x->data.begin() + i * n + c0, x->data.begin() + i * n + c1, out->data.begin() + i * w);
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out, m, n, c0, w] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < w; ++j)
          x->grad[static_cast<size_t>(i * n + c0 + j)] += out->grad[static_cast<size_t>(i * w + j)];
    });
  }
  return out;
}

inline TensorPtr concat_rows(const TensorPtr& a, const TensorPtr& b) {
  if (a->ndim() != 2 || b->ndim() != 2 || a->dim(1) != b->dim(1))
    throw ShapeError("concat_rows: column mismatch");
  const int64_t ma = a->dim(0), mb = b->dim(0), n = a->dim(1);
  auto out = Tensor::create({ma + mb, n});
  std::copy(a->data.begin(), a->data.end(), out->data.begin());
  std::copy(b->data.begin(), b->data.end(), out->data.begin() + ma * n);
  if (GradTape::recording(a, b)) {
    GradTape::active().record(out, [a, b, out, ma, n] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        const size_t off = static_cast<size_t>(ma * n);
        for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += out->grad[off + i];
      }
    });
  }
  return out;
}

inline TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b) {
  if (a->ndim() != 2 || b->ndim() != 2 || a->dim(0) != b->dim(0))
    throw ShapeError("concat_cols: row mismatch");
  const int64_t m = a->dim(0), na = a->dim(1), nb = b->dim(1);
  auto out = Tensor::create({m, na + nb});
  for (int64_t i = 0; i < m; ++i) {
    std::copy(a->data.begin() + i * na, a->data.begin() + (i + 1) * na, out->data.begin() + i * (na + nb));
    std::copy(b->data.begin() + i * nb, b->data.begin() + (i + 1) * nb, out->data.begin() + i * (na + nb) + na);
  }
  if (GradTape::recording(a, b)) {
    GradTape::active().record(out, [a, b, out, m, na, nb] {
      const int64_t n = na + nb;
      if (a->requires_grad) {
        a->ensure_grad();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < na; ++j)
            a->grad[static_cast<size_t>(i * na + j)] += out->grad[static_cast<size_t>(i * n + j)];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < nb; ++j)
            b->grad[static_cast<size_t>(i * nb + j)] += out->grad[static_cast<size_t>(i * n + na + j)];
      }
    });
  }
  return out;
}

// Appends zero rows until the tensor has new_m rows.
inline TensorPtr pad_rows(const TensorPtr& x, int64_t new_m) {
  if (x->ndim() != 2) throw ShapeError("pad_rows: need 2-d tensor");
  if (new_m < x->dim(0)) throw ShapeError("pad_rows: cannot shrink");
  const int64_t n = x->dim(1);
  auto out = Tensor::create({new_m, n});
  std::copy(x->data.begin(), x->data.end(), out->data.begin());
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline TensorPtr sum_all(const TensorPtr& x) {
  auto out = Tensor::create({1});
  double s = 0.0;
  for (double v : x->data) s += v;
  out->data[0] = s;
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      const double g = out->grad[0];
      for (auto& dv : x->grad) dv += g;
    });
  }
  return out;
}

inline TensorPtr mean_all(const TensorPtr& x) {
  if (x->numel() == 0) throw ShapeError("mean_all: empty tensor");
  auto out = Tensor::create({1});
  double s = 0.0;
  for (double v : x->data) s += v;
  const double inv = 1.0 / static_cast<double>(x->numel());
  out->data[0] = s * inv;
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out, inv] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      const double g = out->grad[0] * inv;
      for (auto& dv : x->grad) dv += g;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

inline TensorPtr relu(const TensorPtr& x) {
  auto out = Tensor::create(x->shape);
  // std::max propagates NaN here, so a poisoned activation reaches the loss
  // instead of being silently zeroed.
  for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = std::max(x->data[i], 0.0);
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i)
        if (x->data[i] > 0.0) x->grad[i] += out->grad[i];
    });
  }
  return out;
}

inline TensorPtr sigmoid(const TensorPtr& x) {
  auto out = Tensor::create(x->shape);
  for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = 1.0 / (1.0 + std::exp(-x->data[i]));
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) {
        const double y = out->data[i];
        x->grad[i] += out->grad[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

// swish(x) = x * sigmoid(x)
inline TensorPtr swish(const TensorPtr& x) {
  auto out = Tensor::create(x->shape);
  for (size_t i = 0; i < x->data.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x->data[i]));
    out->data[i] = x->data[i] * s;
  }
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-x->data[i]));
        x->grad[i] += out->grad[i] * (s + x->data[i] * s * (1.0 - s));
      }
    });
  }
  return out;
}

// Gated linear unit over columns: x[m x 2n] -> a * sigmoid(b).
inline TensorPtr glu(const TensorPtr& x) {
  if (x->ndim() != 2 || x->dim(1) % 2 != 0) throw ShapeError("glu: need even column count");
  const int64_t m = x->dim(0), n = x->dim(1) / 2;
  auto out = Tensor::create({m, n});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      const double a = x->data[static_cast<size_t>(i * 2 * n + j)];
      const double b = x->data[static_cast<size_t>(i * 2 * n + n + j)];
      out->data[static_cast<size_t>(i * n + j)] = a / (1.0 + std::exp(-b));
    }
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out, m, n] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
          const double g = out->grad[static_cast<size_t>(i * n + j)];
          if (g == 0.0) continue;
          const double a = x->data[static_cast<size_t>(i * 2 * n + j)];
          const double b = x->data[static_cast<size_t>(i * 2 * n + n + j)];
          const double s = 1.0 / (1.0 + std::exp(-b));
          x->grad[static_cast<size_t>(i * 2 * n + j)] += g * s;
          x->grad[static_cast<size_t>(i * 2 * n + n + j)] += g * a * s * (1.0 - s);
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalisation
// ---------------------------------------------------------------------------

// Row-wise softmax with max subtraction.
inline TensorPtr softmax_rows(const TensorPtr& x) {
  if (x->ndim() != 2) throw ShapeError("softmax_rows: need 2-d tensor");
  const int64_t m = x->dim(0), n = x->dim(1);
  auto out = Tensor::create({m, n});
  for (int64_t i = 0; i < m; ++i) {
    const double* xr = x->data.data() + i * n;
    double* yr = out->data.data() + i * n;
    double mx = xr[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double den = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      den += yr[j];
    }
    for (int64_t j = 0; j < n; ++j) yr[j] /= den;
  }
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out, m, n] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (int64_t i = 0; i < m; ++i) {
        const double* y = out->data.data() + i * n;
        const double* g = out->grad.data() + i * n;
        double dot = 0.0;
        for (int64_t j = 0; j < n; ++j) dot += y[j] * g[j];
        double* dx = x->grad.data() + i * n;
        for (int64_t j = 0; j < n; ++j) dx[j] += y[j] * (g[j] - dot);
      }
    });
  }
  return out;
}

// Per-row layer normalisation: gamma, beta have length n.
inline TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                            double eps = 1e-5) {
  if (x->ndim() != 2) throw ShapeError("layer_norm: need 2-d tensor");
  const int64_t m = x->dim(0), n = x->dim(1);
  if (gamma->numel() != n || beta->numel() != n) throw ShapeError("layer_norm: gamma/beta length");
  auto out = Tensor::create({m, n});
  std::vector<double> inv_sigma(static_cast<size_t>(m));
  std::vector<double> mu(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) {
    const double* xr = x->data.data() + i * n;
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) s += xr[j];
    const double mean = s / static_cast<double>(n);
    double var = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    mu[static_cast<size_t>(i)] = mean;
    inv_sigma[static_cast<size_t>(i)] = inv;
    double* yr = out->data.data() + i * n;
    for (int64_t j = 0; j < n; ++j)
      yr[j] = gamma->data[static_cast<size_t>(j)] * (xr[j] - mean) * inv + beta->data[static_cast<size_t>(j)];
  }
  if (GradTape::recording(x, gamma, beta)) {
    GradTape::active().record(out, [x, gamma, beta, out, m, n, mu, inv_sigma] {
      for (int64_t i = 0; i < m; ++i) {
        const double* xr = x->data.data() + i * n;
        const double* g = out->grad.data() + i * n;
        const double mean = mu[static_cast<size_t>(i)];
        const double inv = inv_sigma[static_cast<size_t>(i)];
        if (gamma->requires_grad) {
          gamma->ensure_grad();
          for (int64_t j = 0; j < n; ++j)
            gamma->grad[static_cast<size_t>(j)] += g[j] * (xr[j] - mean) * inv;
        }
        if (beta->requires_grad) {
          beta->ensure_grad();
          for (int64_t j = 0; j < n; ++j) beta->grad[static_cast<size_t>(j)] += g[j];
        }
        if (x->requires_grad) {
          x->ensure_grad();
          // dx = inv * gamma .* (g - mean(gg) - xhat * mean(gg .* xhat))
          double sum_gg = 0.0, sum_ggx = 0.0;
          for (int64_t j = 0; j < n; ++j) {
            const double gg = g[j] * gamma->data[static_cast<size_t>(j)];
            const double xh = (xr[j] - mean) * inv;
            sum_gg += gg;
            sum_ggx += gg * xh;
          }
          const double inv_n = 1.0 / static_cast<double>(n);
          double* dx = x->grad.data() + i * n;
          for (int64_t j = 0; j < n; ++j) {
            const double gg = g[j] * gamma->data[static_cast<size_t>(j)];
            const double xh = (xr[j] - mean) * inv;
            dx[j] += inv * (gg - sum_gg * inv_n - xh * sum_ggx * inv_n);
          }
        }
      }
    });
  }
  return out;
}

// Per-channel normalisation of a [C x T x H] map over its T*H positions.
// Batch-independent counterpart of the usual conv norm layer.
inline TensorPtr channel_norm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                              double eps = 1e-5) {
  if (x->ndim() != 3) throw ShapeError("channel_norm: need [C x T x H]");
  const int64_t c = x->dim(0), p = x->dim(1) * x->dim(2);
  if (gamma->numel() != c || beta->numel() != c) throw ShapeError("channel_norm: gamma/beta length");
  auto out = Tensor::create(x->shape);
  std::vector<double> mu(static_cast<size_t>(c)), inv_sigma(static_cast<size_t>(c));
  for (int64_t ci = 0; ci < c; ++ci) {
    const double* xr = x->data.data() + ci * p;
    double s = 0.0;
    for (int64_t j = 0; j < p; ++j) s += xr[j];
    const double mean = s / static_cast<double>(p);
    double var = 0.0;
    for (int64_t j = 0; j < p; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(p);
    const double inv = 1.0 / std::sqrt(var + eps);
    mu[static_cast<size_t>(ci)] = mean;
    inv_sigma[static_cast<size_t>(ci)] = inv;
    const double gam = gamma->data[static_cast<size_t>(ci)];
    const double bet = beta->data[static_cast<size_t>(ci)];
    double* yr = out->data.data() + ci * p;
    for (int64_t j = 0; j < p; ++j) yr[j] = gam * (xr[j] - mean) * inv + bet;
  }
  if (GradTape::recording(x, gamma, beta)) {
    GradTape::active().record(out, [x, gamma, beta, out, c, p, mu, inv_sigma] {
      for (int64_t ci = 0; ci < c; ++ci) {
        const double* xr = x->data.data() + ci * p;
        const double* g = out->grad.data() + ci * p;
        const double mean = mu[static_cast<size_t>(ci)];
        const double inv = inv_sigma[static_cast<size_t>(ci)];
        const double gam = gamma->data[static_cast<size_t>(ci)];
        if (gamma->requires_grad) {
          gamma->ensure_grad();
          double s = 0.0;
          for (int64_t j = 0; j < p; ++j) s += g[j] * (xr[j] - mean) * inv;
          gamma->grad[static_cast<size_t>(ci)] += s;
        }
        if (beta->requires_grad) {
          beta->ensure_grad();
          double s = 0.0;
          for (int64_t j = 0; j < p; ++j) s += g[j];
          beta->grad[static_cast<size_t>(ci)] += s;
        }
        if (x->requires_grad) {
          x->ensure_grad();
          double sum_g = 0.0, sum_gx = 0.0;
          for (int64_t j = 0; j < p; ++j) {
            const double xh = (xr[j] - mean) * inv;
            sum_g += g[j];
            sum_gx += g[j] * xh;
          }
          const double inv_p = 1.0 / static_cast<double>(p);
          double* dx = x->grad.data() + ci * p;
          for (int64_t j = 0; j < p; ++j) {
            const double xh = (xr[j] - mean) * inv;
            dx[j] += gam * inv * (g[j] - sum_g * inv_p - xh * sum_gx * inv_p);
          }
        }
      }
    });
  }
  return out;
}

// Row-wise L2 normalisation.  Near-zero rows are a numeric error.
inline TensorPtr l2_normalize_rows(const TensorPtr& x) {
  if (x->ndim() != 2) throw ShapeError("l2_normalize_rows: need 2-d tensor");
  const int64_t m = x->dim(0), n = x->dim(1);
  auto out = Tensor::create({m, n});
  std::vector<double> inv_norm(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) {
    const double* xr = x->data.data() + i * n;
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) s += xr[j] * xr[j];
    const double nrm = std::sqrt(s);
    if (!(nrm > 1e-30)) throw NumericError("l2_normalize_rows: zero-norm row");
    inv_norm[static_cast<size_t>(i)] = 1.0 / nrm;
    double* yr = out->data.data() + i * n;
    for (int64_t j = 0; j < n; ++j) yr[j] = xr[j] / nrm;
  }
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out, m, n, inv_norm] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (int64_t i = 0; i < m; ++i) {
        const double* y = out->data.data() + i * n;
        const double* g = out->grad.data() + i * n;
        double dot = 0.0;
        for (int64_t j = 0; j < n; ++j) dot += y[j] * g[j];
        double* dx = x->grad.data() + i * n;
        const double inv = inv_norm[static_cast<size_t>(i)];
        for (int64_t j = 0; j < n; ++j) dx[j] += inv * (g[j] - dot * y[j]);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

// Inverted dropout.  Identity (same tensor) when not training or p == 0.
inline TensorPtr dropout(const TensorPtr& x, double p, bool training, Rng* rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return x;
  if (rng == nullptr) throw ContractError("dropout: training mode needs an rng");
  auto out = Tensor::create(x->shape);
  auto mask = std::make_shared<std::vector<double>>(x->data.size());
  const double keep = 1.0 - p;
  const double inv_keep = 1.0 / keep;
  for (size_t i = 0; i < x->data.size(); ++i) {
    const double m = rng->uniform() < keep ? inv_keep : 0.0;
    (*mask)[i] = m;
    out->data[i] = x->data[i] * m;
  }
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out, mask] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i] * (*mask)[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

// Depthwise temporal convolution.  x[T x C], kernel[K x C], K odd, zero
// padding, output [T x C]: out[t,c] = sum_u kernel[u,c] * x[t+u-(K-1)/2, c].
inline TensorPtr depthwise_conv1d(const TensorPtr& x, const TensorPtr& kernel) {
  if (x->ndim() != 2 || kernel->ndim() != 2 || kernel->dim(1) != x->dim(1))
    throw ShapeError("depthwise_conv1d: need x[T x C], kernel[K x C]");
  if (kernel->dim(0) % 2 == 0) throw ConfigError("depthwise_conv1d: kernel size must be odd");
  const int64_t t_len = x->dim(0), c = x->dim(1), k = kernel->dim(0), half = (k - 1) / 2;
  auto out = Tensor::create({t_len, c});
  for (int64_t t = 0; t < t_len; ++t) {
    double* orow = out->data.data() + t * c;
    for (int64_t u = 0; u < k; ++u) {
      const int64_t ti = t + u - half;
      if (ti < 0 || ti >= t_len) continue;
      const double* xrow = x->data.data() + ti * c;
      const double* krow = kernel->data.data() + u * c;
      for (int64_t j = 0; j < c; ++j) orow[j] += krow[j] * xrow[j];
    }
  }
  if (GradTape::recording(x, kernel)) {
    GradTape::active().record(out, [x, kernel, out, t_len, c, k, half] {
      if (x->requires_grad) x->ensure_grad();
      if (kernel->requires_grad) kernel->ensure_grad();
      for (int64_t t = 0; t < t_len; ++t) {
        const double* grow = out->grad.data() + t * c;
        for (int64_t u = 0; u < k; ++u) {
          const int64_t ti = t + u - half;
          if (ti < 0 || ti >= t_len) continue;
          if (x->requires_grad) {
            double* dxrow = x->grad.data() + ti * c;
            const double* krow = kernel->data.data() + u * c;
            for (int64_t j = 0; j < c; ++j) dxrow[j] += krow[j] * grow[j];
          }
          if (kernel->requires_grad) {
            double* dkrow = kernel->grad.data() + u * c;
            const double* xrow = x->data.data() + ti * c;
            for (int64_t j = 0; j < c; ++j) dkrow[j] += xrow[j] * grow[j];
          }
        }
      }
    });
  }
  return out;
}

// 2-d convolution on a [Cin x T x H] map with kernel [Cout x Cin x kh x kw],
// odd kh == kw, same padding (kh-1)/2, common stride on both axes.
// Output dims: floor((T + 2p - kh) / stride) + 1 = ceil(T / stride) and
// likewise for H.
inline TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias, int stride) {
  if (x->ndim() != 3 || w->ndim() != 4) throw ShapeError("conv2d: need x[Cin x T x H], w[Cout x Cin x kh x kw]");
  const int64_t cin = x->dim(0), t_in = x->dim(1), h_in = x->dim(2);
  const int64_t cout = w->dim(0), kh = w->dim(2), kw = w->dim(3);
  if (w->dim(1) != cin) throw ShapeError("conv2d: channel mismatch");
  if (kh != kw || kh % 2 == 0) throw ConfigError("conv2d: kernel must be square and odd");
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (bias && bias->numel() != cout) throw ShapeError("conv2d: bias length");
  const int64_t pad = (kh - 1) / 2;
  const int64_t t_out = (t_in + 2 * pad - kh) / stride + 1;
  const int64_t h_out = (h_in + 2 * pad - kh) / stride + 1;
  auto out = Tensor::create({cout, t_out, h_out});

  for (int64_t co = 0; co < cout; ++co) {
    double* oplane = out->data.data() + co * t_out * h_out;
    if (bias) {
      const double bv = bias->data[static_cast<size_t>(co)];
      for (int64_t i = 0; i < t_out * h_out; ++i) oplane[i] = bv;
    }
    for (int64_t ci = 0; ci < cin; ++ci) {
      const double* xplane = x->data.data() + ci * t_in * h_in;
      for (int64_t dt = 0; dt < kh; ++dt)
        for (int64_t dh = 0; dh < kw; ++dh) {
          const double wv = w->data[static_cast<size_t>(((co * cin + ci) * kh + dt) * kw + dh)];
          if (wv == 0.0) continue;
          for (int64_t to = 0; to < t_out; ++to) {
            const int64_t ti = to * stride + dt - pad;
            if (ti < 0 || ti >= t_in) continue;
            const double* xrow = xplane + ti * h_in;
            double* orow = oplane + to * h_out;
            for (int64_t ho = 0; ho < h_out; ++ho) {
              const int64_t hi = ho * stride + dh - pad;
              if (hi < 0 || hi >= h_in) continue;
              orow[ho] += wv * xrow[hi];
            }
          }
        }
    }
  }

  const bool rec = bias ? GradTape::recording(x, w, bias) : GradTape::recording(x, w);
  if (rec) {
    GradTape::active().record(out, [x, w, bias, out, cin, t_in, h_in, cout, kh, kw, pad, stride,
                                    t_out, h_out] {
      if (x->requires_grad) x->ensure_grad();
      if (w->requires_grad) w->ensure_grad();
      for (int64_t co = 0; co < cout; ++co) {
        const double* gplane = out->grad.data() + co * t_out * h_out;
        for (int64_t ci = 0; ci < cin; ++ci) {
          for (int64_t dt = 0; dt < kh; ++dt)
            for (int64_t dh = 0; dh < kw; ++dh) {
              const size_t widx = static_cast<size_t>(((co * cin + ci) * kh + dt) * kw + dh);
              const double wv = w->data[widx];
              double dw_acc = 0.0;
              for (int64_t to = 0; to < t_out; ++to) {
                const int64_t ti = to * stride + dt - pad;
                if (ti < 0 || ti >= t_in) continue;
                const double* grow = gplane + to * h_out;
                const double* xrow = x->data.data() + (ci * t_in + ti) * h_in;
                double* dxrow = x->requires_grad ? x->grad.data() + (ci * t_in + ti) * h_in : nullptr;
                for (int64_t ho = 0; ho < h_out; ++ho) {
                  const int64_t hi = ho * stride + dh - pad;
                  if (hi < 0 || hi >= h_in) continue;
                  const double g = grow[ho];
                  dw_acc += g * xrow[hi];
                  if (dxrow) dxrow[hi] += wv * g;
                }
              }
              if (w->requires_grad) w->grad[widx] += dw_acc;
            }
        }
        if (bias && bias->requires_grad) {
          bias->ensure_grad();
          double s = 0.0;
          for (int64_t i = 0; i < t_out * h_out; ++i) s += gplane[i];
          bias->grad[static_cast<size_t>(co)] += s;
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

// Scaled dot-product multi-head attention.
//
// q[Lq x dq], k[Lk x dq], v[Lk x dv]; dq and dv divisible by heads; per-head
// scale 1/sqrt(dq/heads).  blocked (optional, Lq*Lk row-major) marks pairs
// that receive zero weight; a fully blocked query row yields a zero output
// row.  With order_invariant set, the softmax denominator and the weighted
// value sums are accumulated in sorted order, making the output row for a
// query bit-identical under any permutation of the key/value rows.
//
// Evaluation mode streams one query row at a time and keeps only O(Lk)
// workspace; attention weights are stored only while recording for backward.
inline TensorPtr multi_head_attention(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                                      int heads, const std::vector<uint8_t>* blocked = nullptr,
                                      bool order_invariant = false) {
  if (q->ndim() != 2 || k->ndim() != 2 || v->ndim() != 2)
    throw ShapeError("multi_head_attention: need 2-d q, k, v");
  const int64_t lq = q->dim(0), dq = q->dim(1), lk = k->dim(0), dv = v->dim(1);
  if (k->dim(1) != dq) throw ShapeError("multi_head_attention: q/k width mismatch");
  if (v->dim(0) != lk) throw ShapeError("multi_head_attention: k/v length mismatch");
  if (heads <= 0 || dq % heads != 0 || dv % heads != 0)
    throw ConfigError("multi_head_attention: dims not divisible by heads");
  if (blocked && static_cast<int64_t>(blocked->size()) != lq * lk)
    throw ShapeError("multi_head_attention: mask size");
  const int64_t dhq = dq / heads, dhv = dv / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dhq));

  auto out = Tensor::create({lq, dv});
  const bool rec = GradTape::recording(q, k, v);
  // Attention weights, saved only for backward: [lq x heads x lk].
  std::shared_ptr<std::vector<double>> wstore;
  if (rec) wstore = std::make_shared<std::vector<double>>(static_cast<size_t>(lq * heads * lk));

  std::vector<double> weights(static_cast<size_t>(lk));
  std::vector<double> terms(static_cast<size_t>(lk));
  for (int64_t i = 0; i < lq; ++i) {
    const uint8_t* brow = blocked ? blocked->data() + i * lk : nullptr;
    for (int h = 0; h < heads; ++h) {
      const double* qrow = q->data.data() + i * dq + h * dhq;
      // Scores for allowed keys; max for the stable softmax shift.
      bool any = false;
      double mx = 0.0;
      for (int64_t j = 0; j < lk; ++j) {
        if (brow && brow[j]) {
          weights[static_cast<size_t>(j)] = 0.0;
          continue;
        }
        const double* krow = k->data.data() + j * dq + h * dhq;
        double s = 0.0;
        for (int64_t d = 0; d < dhq; ++d) s += qrow[d] * krow[d];
        s *= sc;
        weights[static_cast<size_t>(j)] = s;
        if (!any || s > mx) mx = s;
        any = true;
      }
      if (!any) {
        std::fill(weights.begin(), weights.end(), 0.0);
      } else {
        double den;
        if (order_invariant) {
          terms.clear();
          for (int64_t j = 0; j < lk; ++j) {
            if (brow && brow[j]) continue;
            weights[static_cast<size_t>(j)] = std::exp(weights[static_cast<size_t>(j)] - mx);
            terms.push_back(weights[static_cast<size_t>(j)]);
          }
          den = ordered_sum(terms);
        } else {
          den = 0.0;
          for (int64_t j = 0; j < lk; ++j) {
            if (brow && brow[j]) continue;
            weights[static_cast<size_t>(j)] = std::exp(weights[static_cast<size_t>(j)] - mx);
            den += weights[static_cast<size_t>(j)];
          }
        }
        for (int64_t j = 0; j < lk; ++j) {
          if (brow && brow[j]) continue;
          weights[static_cast<size_t>(j)] /= den;
        }
      }
      if (rec)
        std::copy(weights.begin(), weights.end(),
                  wstore->begin() + static_cast<size_t>((i * heads + h) * lk));
      double* orow = out->data.data() + i * dv + h * dhv;
      if (order_invariant) {
        for (int64_t d = 0; d < dhv; ++d) {
          terms.clear();
          for (int64_t j = 0; j < lk; ++j) {
            const double wj = weights[static_cast<size_t>(j)];
            if (wj != 0.0) terms.push_back(wj * v->data[static_cast<size_t>(j * dv + h * dhv + d)]);
          }
          orow[d] = ordered_sum(terms);
        }
      } else {
        for (int64_t j = 0; j < lk; ++j) {
          const double wj = weights[static_cast<size_t>(j)];
          if (wj == 0.0) continue;
          const double* vrow = v->data.data() + j * dv + h * dhv;
          for (int64_t d = 0; d < dhv; ++d) orow[d] += wj * vrow[d];
        }
      }
    }
  }

  if (rec) {
    GradTape::active().record(out, [q, k, v, out, wstore, lq, lk, dq, dv, heads, dhq, dhv, sc] {
      if (q->requires_grad) q->ensure_grad();
      if (k->requires_grad) k->ensure_grad();
      if (v->requires_grad) v->ensure_grad();
      std::vector<double> dw(static_cast<size_t>(lk));
      for (int64_t i = 0; i < lq; ++i)
        for (int h = 0; h < heads; ++h) {
          const double* wrow = wstore->data() + (i * heads + h) * lk;
          const double* grow = out->grad.data() + i * dv + h * dhv;
          // dV and d(weights)
          double sum_wdw = 0.0;
          for (int64_t j = 0; j < lk; ++j) {
            const double wj = wrow[j];
            const double* vrow = v->data.data() + j * dv + h * dhv;
            double s = 0.0;
            for (int64_t d = 0; d < dhv; ++d) s += grow[d] * vrow[d];
            dw[static_cast<size_t>(j)] = s;
            sum_wdw += wj * s;
            if (v->requires_grad && wj != 0.0) {
              double* dvrow = v->grad.data() + j * dv + h * dhv;
              for (int64_t d = 0; d < dhv; ++d) dvrow[d] += wj * grow[d];
            }
          }
          // Softmax backward, then into q and k.
          const double* qrow = q->data.data() + i * dq + h * dhq;
          double* dqrow = q->requires_grad ? q->grad.data() + i * dq + h * dhq : nullptr;
          for (int64_t j = 0; j < lk; ++j) {
            const double wj = wrow[j];
            if (wj == 0.0) continue;
            const double ds = wj * (dw[static_cast<size_t>(j)] - sum_wdw) * sc;
            if (ds == 0.0) continue;
            const double* krow = k->data.data() + j * dq + h * dhq;
            if (dqrow)
              for (int64_t d = 0; d < dhq; ++d) dqrow[d] += ds * krow[d];
            if (k->requires_grad) {
              double* dkrow = k->grad.data() + j * dq + h * dhq;
              for (int64_t d = 0; d < dhq; ++d) dkrow[d] += ds * qrow[d];
            }
          }
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

// Segmental statistics pooling: [C x T x H] -> [T x 2C] of per-frame
// frequency-axis mean and stddev (population, eps 1e-10).
inline TensorPtr segmental_stat_pool(const TensorPtr& x) {
  if (x->ndim() != 3) throw ShapeError("segmental_stat_pool: need [C x T x H]");
  const int64_t c = x->dim(0), t_len = x->dim(1), h = x->dim(2);
  if (h < 1) throw ShapeError("segmental_stat_pool: empty frequency axis");
  constexpr double kEps = 1e-10;
  auto out = Tensor::create({t_len, 2 * c});
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t t = 0; t < t_len; ++t) {
      const double* xr = x->data.data() + (ci * t_len + t) * h;
      double s = 0.0;
      for (int64_t j = 0; j < h; ++j) s += xr[j];
      const double mean = s / static_cast<double>(h);
      double var = 0.0;
      for (int64_t j = 0; j < h; ++j) {
        const double d = xr[j] - mean;
        var += d * d;
      }
      var /= static_cast<double>(h);
      out->data[static_cast<size_t>(t * 2 * c + ci)] = mean;
      out->data[static_cast<size_t>(t * 2 * c + c + ci)] = std::sqrt(var + kEps);
    }
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out, c, t_len, h] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      const double inv_h = 1.0 / static_cast<double>(h);
      for (int64_t ci = 0; ci < c; ++ci)
        for (int64_t t = 0; t < t_len; ++t) {
          const double g_mean = out->grad[static_cast<size_t>(t * 2 * c + ci)];
          const double g_std = out->grad[static_cast<size_t>(t * 2 * c + c + ci)];
          const double mean = out->data[static_cast<size_t>(t * 2 * c + ci)];
          const double sd = out->data[static_cast<size_t>(t * 2 * c + c + ci)];
          const double* xr = x->data.data() + (ci * t_len + t) * h;
          double* dx = x->grad.data() + (ci * t_len + t) * h;
          for (int64_t j = 0; j < h; ++j)
            dx[j] += g_mean * inv_h + g_std * (xr[j] - mean) * inv_h / sd;
        }
    });
  }
  return out;
}

// Global statistics pooling: [C x T x H] -> [1 x 2C] over all T*H positions.
inline TensorPtr global_stat_pool(const TensorPtr& x) {
  if (x->ndim() != 3) throw ShapeError("global_stat_pool: need [C x T x H]");
  const int64_t c = x->dim(0), p = x->dim(1) * x->dim(2);
  if (p < 1) throw ShapeError("global_stat_pool: empty map");
  constexpr double kEps = 1e-10;
  auto out = Tensor::create({1, 2 * c});
  for (int64_t ci = 0; ci < c; ++ci) {
    const double* xr = x->data.data() + ci * p;
    double s = 0.0;
    for (int64_t j = 0; j < p; ++j) s += xr[j];
    const double mean = s / static_cast<double>(p);
    double var = 0.0;
    for (int64_t j = 0; j < p; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(p);
    out->data[static_cast<size_t>(ci)] = mean;
    out->data[static_cast<size_t>(c + ci)] = std::sqrt(var + kEps);
  }
  if (GradTape::recording(x)) {
    GradTape::active().record(out, [x, out, c, p] {
      if (!x->requires_grad) return;
      x->ensure_grad();
      const double inv_p = 1.0 / static_cast<double>(p);
      for (int64_t ci = 0; ci < c; ++ci) {
        const double g_mean = out->grad[static_cast<size_t>(ci)];
        const double g_std = out->grad[static_cast<size_t>(c + ci)];
        const double mean = out->data[static_cast<size_t>(ci)];
        const double sd = out->data[static_cast<size_t>(c + ci)];
        const double* xr = x->data.data() + ci * p;
        double* dx = x->grad.data() + ci * p;
        for (int64_t j = 0; j < p; ++j)
          dx[j] += g_mean * inv_p + g_std * (xr[j] - mean) * inv_p / sd;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Mean binary cross-entropy.  Predictions clamped to [1e-7, 1 - 1e-7]; the
// clamp region contributes zero gradient.
inline TensorPtr bce_loss(const TensorPtr& pred, const TensorPtr& target) {
  check_same_shape(*pred, *target, "bce_loss");
  constexpr double kLo = 1e-7, kHi = 1.0 - 1e-7;
  auto out = Tensor::create({1});
  const int64_t n = pred->numel();
  if (n == 0) throw ShapeError("bce_loss: empty input");
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double p = std::clamp(pred->data[static_cast<size_t>(i)], kLo, kHi);
    const double y = target->data[static_cast<size_t>(i)];
    s -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  out->data[0] = s / static_cast<double>(n);
  if (GradTape::recording(pred, target)) {
    GradTape::active().record(out, [pred, target, out, n] {
      if (!pred->requires_grad) return;
      pred->ensure_grad();
      constexpr double kLo2 = 1e-7, kHi2 = 1.0 - 1e-7;
      const double g = out->grad[0] / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i) {
        const double p = pred->data[static_cast<size_t>(i)];
        if (p < kLo2 || p > kHi2) continue;  // clamped: flat
        const double y = target->data[static_cast<size_t>(i)];
        pred->grad[static_cast<size_t>(i)] += g * (-y / p + (1.0 - y) / (1.0 - p));
      }
    });
  }
  return out;
}

// Mean softmax cross-entropy from logits; labels are class indices.
inline TensorPtr cross_entropy_logits(const TensorPtr& logits, const std::vector<int64_t>& labels) {
  if (logits->ndim() != 2) throw ShapeError("cross_entropy_logits: need [B x K] logits");
  const int64_t b = logits->dim(0), kk = logits->dim(1);
  if (static_cast<int64_t>(labels.size()) != b) throw ShapeError("cross_entropy_logits: label count");
  for (int64_t i = 0; i < b; ++i)
    if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= kk)
      throw ShapeError("cross_entropy_logits: label out of range");
  auto out = Tensor::create({1});
  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(b * kk));
  double total = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    const double* z = logits->data.data() + i * kk;
    double mx = z[0];
    for (int64_t j = 1; j < kk; ++j) mx = std::max(mx, z[j]);
    double den = 0.0;
    for (int64_t j = 0; j < kk; ++j) den += std::exp(z[j] - mx);
    const double lse = mx + std::log(den);
    total += lse - z[labels[static_cast<size_t>(i)]];
    for (int64_t j = 0; j < kk; ++j)
      (*probs)[static_cast<size_t>(i * kk + j)] = std::exp(z[j] - lse);
  }
  out->data[0] = total / static_cast<double>(b);
  if (GradTape::recording(logits)) {
    GradTape::active().record(out, [logits, out, probs, labels, b, kk] {
      if (!logits->requires_grad) return;
      logits->ensure_grad();
      const double g = out->grad[0] / static_cast<double>(b);
      for (int64_t i = 0; i < b; ++i) {
        double* dz = logits->grad.data() + i * kk;
        const double* pr = probs->data() + i * kk;
        for (int64_t j = 0; j < kk; ++j) dz[j] += g * pr[j];
        dz[labels[static_cast<size_t>(i)]] -= g;
      }
    });
  }
  return out;
}

// Additive angular margin on cosine scores.  cosines[B x K]; for each row's
// true class c the score becomes s * cos(theta + m), all other entries are
// scaled by s.  Cosines are clamped away from +-1 before the angle is taken;
// the clamp region contributes zero gradient.
inline TensorPtr arcface_margin(const TensorPtr& cosines, const std::vector<int64_t>& labels,
                                double s, double m) {
  if (cosines->ndim() != 2) throw ShapeError("arcface_margin: need [B x K] cosines");
  const int64_t b = cosines->dim(0), kk = cosines->dim(1);
  if (static_cast<int64_t>(labels.size()) != b) throw ShapeError("arcface_margin: label count");
  constexpr double kClamp = 1e-7;
  const double cos_m = std::cos(m), sin_m = std::sin(m);
  auto out = Tensor::create({b, kk});
  for (int64_t i = 0; i < b; ++i) {
    const int64_t y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= kk) throw ShapeError("arcface_margin: label out of range");
    for (int64_t j = 0; j < kk; ++j) {
      const double c = cosines->data[static_cast<size_t>(i * kk + j)];
      if (j == y) {
        const double cc = std::clamp(c, -1.0 + kClamp, 1.0 - kClamp);
        const double sn = std::sqrt(1.0 - cc * cc);
        out->data[static_cast<size_t>(i * kk + j)] = s * (cc * cos_m - sn * sin_m);
      } else {
        out->data[static_cast<size_t>(i * kk + j)] = s * c;
      }
    }
  }
  if (GradTape::recording(cosines)) {
    GradTape::active().record(out, [cosines, out, labels, s, cos_m, sin_m, b, kk] {
      if (!cosines->requires_grad) return;
      cosines->ensure_grad();
      for (int64_t i = 0; i < b; ++i) {
        const int64_t y = labels[static_cast<size_t>(i)];
        for (int64_t j = 0; j < kk; ++j) {
          const double g = out->grad[static_cast<size_t>(i * kk + j)];
          if (g == 0.0) continue;
          if (j == y) {
            const double c = cosines->data[static_cast<size_t>(i * kk + j)];
            if (c <= -1.0 + kClamp || c >= 1.0 - kClamp) continue;  // clamped: flat
            const double sn = std::sqrt(1.0 - c * c);
            cosines->grad[static_cast<size_t>(i * kk + j)] += g * s * (cos_m + sin_m * c / sn);
          } else {
            cosines->grad[static_cast<size_t>(i * kk + j)] += g * s;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace seqdiar
