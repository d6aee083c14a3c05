// seqdiar/fft.hpp
//
// Iterative radix-2 FFT and FFT-based real convolution.

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
#include <complex>
#include <cstdint>
#include <vector>

#include "seqdiar/common.hpp"

namespace seqdiar {

inline size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative Cooley-Tukey.  Size must be a power of two.
inline void fft(std::vector<std::complex<double>>& a, bool inverse = false) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw ContractError("fft: size must be a power of two");
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> t = a[i + j + len / 2] * w;
        a[i + j] = u + t;
        a[i + j + len / 2] = u - t;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= inv_n;
  }
}

// Power spectrum of a real frame zero-padded to nfft: bins 0 .. nfft/2.
inline std::vector<double> power_spectrum(const std::vector<double>& frame, size_t nfft) {
  if (frame.size() > nfft) throw ContractError("power_spectrum: frame longer than nfft");
  std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
  for (size_t i = 0; i < frame.size(); ++i) buf[i] = {frame[i], 0.0};
  fft(buf);
  std::vector<double> p(nfft / 2 + 1);
  for (size_t i = 0; i <= nfft / 2; ++i) p[i] = std::norm(buf[i]);
  return p;
}

// Full linear convolution of two real signals via FFT: length |x|+|h|-1.
inline std::vector<double> fft_convolve(const std::vector<double>& x, const std::vector<double>& h) {
  if (x.empty() || h.empty()) return {};
  const size_t out_len = x.size() + h.size() - 1;
  const size_t n = next_pow2(out_len);
  std::vector<std::complex<double>> fx(n, {0.0, 0.0}), fh(n, {0.0, 0.0});
  for (size_t i = 0; i < x.size(); ++i) fx[i] = {x[i], 0.0};
  for (size_t i = 0; i < h.size(); ++i) fh[i] = {h[i], 0.0};
  fft(fx);
  fft(fh);
  for (size_t i = 0; i < n; ++i) fx[i] *= fh[i];
  fft(fx, /*inverse=*/true);
  std::vector<double> out(out_len);
  for (size_t i = 0; i < out_len; ++i) out[i] = fx[i].real();
  return out;
}

}  // namespace seqdiar
