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

#include "siamedp/layers.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "siamedp/parallel.h"

namespace siamedp {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

constexpr int kColTileElements = 1 << 16;

struct ConvGeometry {
  int channels, height, width;
  int kernel, stride, pad;
  int out_height, out_width;

  int patch_rows() const { return channels * kernel * kernel; }
  int out_pixels() const { return out_height * out_width; }
  bool is_pointwise() const { return kernel == 1 && stride == 1; }
};

template <typename T>
ConvGeometry check_conv(const Shape& input, const ConvParams<T>& params) {
  require_rank4(input, "conv2d");
  const Shape& ws = params.weight.shape();
  if (ws.rank() != 4 || ws[2] != ws[3]) {
    throw ShapeError("conv2d: weight must be (out, in, k, k), got " + ws.str());
  }
  if (ws[2] != 1 && ws[2] != 3) throw ShapeError("conv2d: kernel must be 1x1 or 3x3, got " + ws.str());
  if (params.stride != 1 && params.stride != 2) {
    throw ShapeError("conv2d: stride must be 1 or 2, got " + std::to_string(params.stride));
  }
  if (ws[1] != input[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(input[1]) + " channels but weight " + ws.str() +
                     " expects " + std::to_string(ws[1]));
  }
  if (!params.bias.empty() && static_cast<int>(params.bias.size()) != ws[0]) {
    throw ShapeError("conv2d: bias length does not match output channels");
  }
  ConvGeometry g{input[1], input[2], input[3], ws[2], params.stride, ws[2] / 2, 0, 0};
  g.out_height = conv_output_extent(g.height, g.kernel, g.stride);
  g.out_width = conv_output_extent(g.width, g.kernel, g.stride);
  return g;
}

template <typename T>
void im2col_rows(const T* src, const ConvGeometry& g, int oy_begin, int oy_end, T* col) {
  const int k = g.kernel;
  const int pixels = (oy_end - oy_begin) * g.out_width;
  for (int c = 0; c < g.channels; ++c) {
    const T* plane = src + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + static_cast<std::size_t>((c * k + ky) * k + kx) * pixels;
        for (int oy = oy_begin; oy < oy_end; ++oy) {
          int iy = oy * g.stride - g.pad + ky;
          T* row = dst + (oy - oy_begin) * g.out_width;
          if (iy < 0 || iy >= g.height) {
            std::fill_n(row, g.out_width, T(0));
            continue;
          }
          const T* line = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            int ix = ox * g.stride - g.pad + kx;
            row[ox] = (ix >= 0 && ix < g.width) ? line[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void im2col(const T* src, const ConvGeometry& g, T* col) {
  im2col_rows(src, g, 0, g.out_height, col);
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dst) {
  const int k = g.kernel;
  const int pixels = g.out_pixels();
  for (int c = 0; c < g.channels; ++c) {
    T* plane = dst + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + static_cast<std::size_t>((c * k + ky) * k + kx) * pixels;
        for (int oy = 0; oy < g.out_height; ++oy) {
          int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          T* line = plane + static_cast<std::size_t>(iy) * g.width;
          const T* row = src + oy * g.out_width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) line[ix] += row[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void check_bn_input(const Shape& s, const BatchNormParams<T>& p) {
  require_rank4(s, "batchnorm");
  if (s[1] != p.channels()) {
    throw ShapeError("batchnorm: input has " + std::to_string(s[1]) + " channels, parameters have " +
                     std::to_string(p.channels()));
  }
}

}  // namespace

int conv_output_extent(int in, int kernel, int stride) {
  int pad = kernel / 2;
  return (in + 2 * pad - kernel) / stride + 1;
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const ConvParams<T>& params, ConvCache<T>* cache) {
  const ConvGeometry g = check_conv(input.shape(), params);
  const int out_ch = params.out_channels();
  auto out = BasicTensor<T>::nchw(input.n(), out_ch, g.out_height, g.out_width);
  ConstMatrixMap<T> weights(params.weight.data(), out_ch, g.patch_rows());

  // Output rows per im2col tile; keeps the column buffer near 256 KB.
  const int tile_rows = std::clamp(kColTileElements / std::max(1, g.patch_rows() * g.out_width), 1, g.out_height);

  parallel_for(input.n(), [&](int n) {
    MatrixMap<T> result(out.sample(n), out_ch, g.out_pixels());
    if (g.is_pointwise()) {
      result.noalias() = weights * ConstMatrixMap<T>(input.sample(n), g.patch_rows(), g.out_pixels());
    } else {
      std::vector<T> col(static_cast<std::size_t>(g.patch_rows()) * tile_rows * g.out_width);
      for (int oy = 0; oy < g.out_height; oy += tile_rows) {
        const int rows = std::min(tile_rows, g.out_height - oy);
        const int pixels = rows * g.out_width;
        im2col_rows(input.sample(n), g, oy, oy + rows, col.data());
        result.middleCols(oy * g.out_width, pixels).noalias() =
            weights * ConstMatrixMap<T>(col.data(), g.patch_rows(), pixels);
      }
    }
    if (!params.bias.empty()) {
      for (int o = 0; o < out_ch; ++o) result.row(o).array() += params.bias[o];
    }
  });

  if (cache != nullptr) cache->input = input;
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const ConvCache<T>& cache,
                             const ConvParams<T>& params, bool need_input_grad) {
  if (cache.input.empty()) throw Error("conv2d_backward: no saved forward input");
  const BasicTensor<T>& input = cache.input;
  const ConvGeometry g = check_conv(input.shape(), params);
  const int out_ch = params.out_channels();
  if (!(grad_out.shape() == Shape{input.n(), out_ch, g.out_height, g.out_width})) {
    throw ShapeError("conv2d_backward: grad_out " + grad_out.shape().str() + " does not match forward output (" +
                     std::to_string(input.n()) + "x" + std::to_string(out_ch) + "x" +
                     std::to_string(g.out_height) + "x" + std::to_string(g.out_width) + ")");
  }

  ConvGrads<T> grads;
  grads.weight = BasicTensor<T>(params.weight.shape());
  if (need_input_grad) grads.input = BasicTensor<T>(input.shape());

  MatrixMap<T> grad_w(grads.weight.data(), out_ch, g.patch_rows());
  ConstMatrixMap<T> weights(params.weight.data(), out_ch, g.patch_rows());
  std::vector<T> col(g.is_pointwise() ? 0 : static_cast<std::size_t>(g.patch_rows()) * g.out_pixels());
  std::vector<T> grad_col(col.size());

  for (int n = 0; n < input.n(); ++n) {
    const T* col_ptr = input.sample(n);
    if (!g.is_pointwise()) {
      im2col(input.sample(n), g, col.data());
      col_ptr = col.data();
    }
    ConstMatrixMap<T> cols(col_ptr, g.patch_rows(), g.out_pixels());
    ConstMatrixMap<T> dy(grad_out.sample(n), out_ch, g.out_pixels());
    grad_w.noalias() += dy * cols.transpose();
    if (!need_input_grad) continue;
    if (g.is_pointwise()) {
      MatrixMap<T> dx(grads.input.sample(n), g.patch_rows(), g.out_pixels());
      dx.noalias() = weights.transpose() * dy;
    } else {
      MatrixMap<T> dcol(grad_col.data(), g.patch_rows(), g.out_pixels());
      dcol.noalias() = weights.transpose() * dy;
      col2im_add(grad_col.data(), g, grads.input.sample(n));
    }
  }
  return grads;
}

template <typename T>
BatchNormParams<T> BatchNormParams<T>::identity(int channels) {
  BatchNormParams p;
  p.gamma = BasicTensor<T>(Shape{channels}, T(1));
  p.beta = BasicTensor<T>(Shape{channels}, T(0));
  p.running_mean = BasicTensor<T>(Shape{channels}, T(0));
  p.running_var = BasicTensor<T>(Shape{channels}, T(1));
  return p;
}

template <typename T>
std::vector<BasicTensor<T>> batchnorm_forward(std::span<const BasicTensor<T>> inputs,
                                              const BatchNormParams<T>& params, Mode mode,
                                              BatchNormCache<T>* cache) {
  const int channels = params.channels();
  for (const auto& x : inputs) check_bn_input(x.shape(), params);

  std::vector<T> mean(channels), var(channels);
  std::size_t count = 0;
  for (const auto& x : inputs) count += static_cast<std::size_t>(x.n()) * x.h() * x.w();

  if (mode == Mode::kTrain) {
    if (count == 0) throw ShapeError("batchnorm: empty batch in train mode");
    for (int c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (const auto& x : inputs) {
        const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
        for (int n = 0; n < x.n(); ++n) {
          const T* p = x.data() + x.offset(n, c, 0, 0);
          for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        }
      }
      const double m = sum / static_cast<double>(count);
      double sq = 0.0;
      for (const auto& x : inputs) {
        const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
        for (int n = 0; n < x.n(); ++n) {
          const T* p = x.data() + x.offset(n, c, 0, 0);
          for (std::size_t i = 0; i < plane; ++i) {
            double d = p[i] - m;
            sq += d * d;
          }
        }
      }
      mean[c] = static_cast<T>(m);
      var[c] = static_cast<T>(sq / static_cast<double>(count));
    }
  } else {
    for (int c = 0; c < channels; ++c) {
      if (!(params.running_var[c] > T(0))) throw Error("batchnorm: running variance must be positive");
      mean[c] = params.running_mean[c];
      var[c] = params.running_var[c];
    }
  }

  std::vector<T> inv_std(channels);
  for (int c = 0; c < channels; ++c) inv_std[c] = T(1) / std::sqrt(var[c] + params.epsilon);

  std::vector<BasicTensor<T>> outputs;
  outputs.reserve(inputs.size());
  std::vector<BasicTensor<T>> normalized;
  if (cache != nullptr) normalized.reserve(inputs.size());
  for (const auto& x : inputs) {
    BasicTensor<T> y(x.shape());
    BasicTensor<T> xhat;
    if (cache != nullptr) xhat = BasicTensor<T>(x.shape());
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    for (int n = 0; n < x.n(); ++n) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t base = x.offset(n, c, 0, 0);
        const T m = mean[c], s = inv_std[c], g = params.gamma[c], b = params.beta[c];
        for (std::size_t i = 0; i < plane; ++i) {
          T h = (x[base + i] - m) * s;
          y[base + i] = g * h + b;
          if (cache != nullptr) xhat[base + i] = h;
        }
      }
    }
    outputs.push_back(std::move(y));
    if (cache != nullptr) normalized.push_back(std::move(xhat));
  }

  if (cache != nullptr) {
    cache->mode = mode;
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->batch_mean = std::move(mean);
    cache->batch_var = std::move(var);
    cache->count = count;
  }
  return outputs;
}

template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input, const BatchNormParams<T>& params, Mode mode,
                                 BatchNormCache<T>* cache) {
  auto out = batchnorm_forward(std::span<const BasicTensor<T>>(&input, 1), params, mode, cache);
  return std::move(out.front());
}

template <typename T>
void update_running_stats(BatchNormParams<T>& params, const BatchNormCache<T>& cache) {
  if (cache.mode != Mode::kTrain) return;
  const T mom = params.momentum;
  const double n = static_cast<double>(cache.count);
  const double correction = n > 1 ? n / (n - 1) : 1.0;
  for (int c = 0; c < params.channels(); ++c) {
    params.running_mean[c] = (T(1) - mom) * params.running_mean[c] + mom * cache.batch_mean[c];
    params.running_var[c] =
        (T(1) - mom) * params.running_var[c] + mom * static_cast<T>(cache.batch_var[c] * correction);
  }
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(std::span<const BasicTensor<T>> grad_out, const BatchNormCache<T>& cache,
                                     const BatchNormParams<T>& params) {
  if (cache.normalized.size() != grad_out.size() || cache.inv_std.empty()) {
    throw Error("batchnorm_backward: saved forward context missing or mismatched");
  }
  const int channels = params.channels();
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    if (!(grad_out[i].shape() == cache.normalized[i].shape())) {
      throw ShapeError("batchnorm_backward: grad_out " + grad_out[i].shape().str() + " vs forward " +
                       cache.normalized[i].shape().str());
    }
  }

  BatchNormGrads<T> grads;
  grads.gamma = BasicTensor<T>(Shape{channels});
  grads.beta = BasicTensor<T>(Shape{channels});
  std::vector<double> dgamma(channels, 0.0), dbeta(channels, 0.0);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const auto& dy = grad_out[i];
    const auto& xhat = cache.normalized[i];
    const std::size_t plane = static_cast<std::size_t>(dy.h()) * dy.w();
    for (int n = 0; n < dy.n(); ++n) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t base = dy.offset(n, c, 0, 0);
        double sb = 0.0, sg = 0.0;
        for (std::size_t k = 0; k < plane; ++k) {
          sb += dy[base + k];
          sg += static_cast<double>(dy[base + k]) * xhat[base + k];
        }
        dbeta[c] += sb;
        dgamma[c] += sg;
      }
    }
  }
  for (int c = 0; c < channels; ++c) {
    grads.gamma[c] = static_cast<T>(dgamma[c]);
    grads.beta[c] = static_cast<T>(dbeta[c]);
  }

  const bool train = cache.mode == Mode::kTrain;
  const T count = static_cast<T>(cache.count);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const auto& dy = grad_out[i];
    const auto& xhat = cache.normalized[i];
    BasicTensor<T> dx(dy.shape());
    const std::size_t plane = static_cast<std::size_t>(dy.h()) * dy.w();
    for (int n = 0; n < dy.n(); ++n) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t base = dy.offset(n, c, 0, 0);
        const T scale = params.gamma[c] * cache.inv_std[c];
        if (train) {
          const T k = scale / count;
          const T db = grads.beta[c], dg = grads.gamma[c];
          for (std::size_t j = 0; j < plane; ++j) {
            dx[base + j] = k * (count * dy[base + j] - db - xhat[base + j] * dg);
          }
        } else {
          for (std::size_t j = 0; j < plane; ++j) dx[base + j] = scale * dy[base + j];
        }
      }
    }
    grads.input.push_back(std::move(dx));
  }
  return grads;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>& grad_out, const BatchNormCache<T>& cache,
                                     const BatchNormParams<T>& params) {
  return batchnorm_backward(std::span<const BasicTensor<T>>(&grad_out, 1), cache, params);
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& saved) {
  if (!(grad_out.shape() == saved.shape())) {
    throw ShapeError("relu_backward: grad " + grad_out.shape().str() + " vs saved " + saved.shape().str());
  }
  BasicTensor<T> out(grad_out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = saved[i] > T(0) ? grad_out[i] : T(0);
  return out;
}

template <typename T>
BasicTensor<T> residual_add_forward(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("residual_add: " + a.shape().str() + " vs " + b.shape().str());
  }
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> residual_add_backward(const BasicTensor<T>& grad_out) {
  return {grad_out, grad_out};
}

#define SIAMEDP_INSTANTIATE_LAYERS(T)                                                                        \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const ConvParams<T>&, ConvCache<T>*);        \
  template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const ConvCache<T>&, const ConvParams<T>&,    \
                                        bool);                                                              \
  template struct BatchNormParams<T>;                                                                        \
  template std::vector<BasicTensor<T>> batchnorm_forward(std::span<const BasicTensor<T>>,                    \
                                                         const BatchNormParams<T>&, Mode,                    \
                                                         BatchNormCache<T>*);                                \
  template BasicTensor<T> batchnorm_forward(const BasicTensor<T>&, const BatchNormParams<T>&, Mode,          \
                                            BatchNormCache<T>*);                                             \
  template void update_running_stats(BatchNormParams<T>&, const BatchNormCache<T>&);                         \
  template BatchNormGrads<T> batchnorm_backward(std::span<const BasicTensor<T>>, const BatchNormCache<T>&,   \
                                                const BatchNormParams<T>&);                                  \
  template BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>&, const BatchNormCache<T>&,             \
                                                const BatchNormParams<T>&);                                  \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                               \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                       \
  template BasicTensor<T> residual_add_forward(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template std::pair<BasicTensor<T>, BasicTensor<T>> residual_add_backward(const BasicTensor<T>&);

SIAMEDP_INSTANTIATE_LAYERS(float)
SIAMEDP_INSTANTIATE_LAYERS(double)

}  // namespace siamedp
