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

#include <span>
#include <utility>
#include <vector>

#include "siamedp/tensor.h"

namespace siamedp {

enum class Mode { kTrain, kEval };

// Square convolution weights (out, in, k, k) with k in {1, 3}. Padding is
// k / 2 on every side, which gives out = ceil(in / stride) for both kernels.
// The bias is empty except on batchnorm-folded inference layers.
template <typename T>
struct ConvParams {
  BasicTensor<T> weight;
  std::vector<T> bias;
  int stride = 1;

  int out_channels() const { return weight.shape()[0]; }
  int in_channels() const { return weight.shape()[1]; }
  int kernel() const { return weight.shape()[2]; }
  int padding() const { return kernel() / 2; }
};

template <typename T>
struct ConvCache {
  BasicTensor<T> input;
};

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;   // empty when not requested
  BasicTensor<T> weight;
};

int conv_output_extent(int in, int kernel, int stride);

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const ConvParams<T>& params,
                              ConvCache<T>* cache = nullptr);

// Throws if the cache holds no saved input or grad_out does not match the
// forward output shape.
template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const ConvCache<T>& cache,
                             const ConvParams<T>& params, bool need_input_grad = true);

template <typename T>
struct BatchNormParams {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  T epsilon = T(1e-5);
  T momentum = T(0.1);

  static BatchNormParams identity(int channels);
  int channels() const { return static_cast<int>(gamma.size()); }
};

// Saved forward state. In train mode the statistics are pooled over every
// tensor passed to one forward call, so a search batch and a reference batch
// of different spatial size can share one normalization.
template <typename T>
struct BatchNormCache {
  Mode mode = Mode::kEval;
  std::vector<BasicTensor<T>> normalized;
  std::vector<T> inv_std;
  std::vector<T> batch_mean;
  std::vector<T> batch_var;  // biased, as used for normalization
  std::size_t count = 0;     // elements per channel across all inputs
};

template <typename T>
struct BatchNormGrads {
  std::vector<BasicTensor<T>> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

template <typename T>
std::vector<BasicTensor<T>> batchnorm_forward(std::span<const BasicTensor<T>> inputs,
                                              const BatchNormParams<T>& params, Mode mode,
                                              BatchNormCache<T>* cache = nullptr);

template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input, const BatchNormParams<T>& params,
                                 Mode mode, BatchNormCache<T>* cache = nullptr);

// Folds the batch statistics of a train-mode forward into the running
// estimates (unbiased variance, exponential moving average).
template <typename T>
void update_running_stats(BatchNormParams<T>& params, const BatchNormCache<T>& cache);

template <typename T>
BatchNormGrads<T> batchnorm_backward(std::span<const BasicTensor<T>> grad_out,
                                     const BatchNormCache<T>& cache,
                                     const BatchNormParams<T>& params);

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>& grad_out, const BatchNormCache<T>& cache,
                                     const BatchNormParams<T>& params);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);

// `saved` is either the forward input or output; both have the same sign
// pattern, and gradients are dropped wherever it is <= 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& saved);

template <typename T>
BasicTensor<T> residual_add_forward(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> residual_add_backward(const BasicTensor<T>& grad_out);

}  // namespace siamedp
