// Copyright 2026 The SiamEDP Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "siamedp/optim.h"
#include "siamedp/tensor.h"

namespace siamedp::testing {

template <typename T>
BasicTensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  BasicTensor<T> t(shape);
  for (auto& v : t.vec()) v = static_cast<T>(d(rng));
  return t;
}

// sum_i a_i * b_i, accumulated in double.
template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

// Direct 7-loop convolution with zero padding k/2.
template <typename T>
BasicTensor<T> naive_conv(const BasicTensor<T>& x, const BasicTensor<T>& w, const std::vector<T>& bias, int stride) {
  const int n = x.n(), ci = x.c(), h = x.h(), wd = x.w();
  const int co = w.shape()[0], k = w.shape()[2], pad = k / 2;
  const int oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  BasicTensor<T> out = BasicTensor<T>::nchw(n, co, oh, ow);
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < co; ++o)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double s = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
          for (int i = 0; i < ci; ++i)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = y * stride - pad + ky, ix = xx * stride - pad + kx;
                if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
                s += static_cast<double>(x.at(b, i, iy, ix)) * static_cast<double>(w[((o * ci + i) * k + ky) * k + kx]);
              }
          out.at(b, o, y, xx) = static_cast<T>(s);
        }
  return out;
}

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

inline GradCheckTarget target(const char* name, TensorD& values, const TensorD& analytic) {
  return {name, values.span(), analytic.span()};
}

}  // namespace siamedp::testing
