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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siamedp/layers.h"
#include "siamedp/tensor.h"

namespace siamedp {

// Topology of the residual feature extractor: a strided 3x3 stem followed by
// four stages of residual blocks. Each block is conv-BN-ReLU, conv-BN, a
// shortcut, and a final ReLU; the first block of a stage carries the stage
// stride and gets a 1x1 projection shortcut whenever the stride or channel
// count changes.
struct BackboneConfig {
  int stem_channels = 32;
  int stem_stride = 2;
  std::array<int, 4> stage_channels{32, 64, 128, 128};
  std::array<int, 4> stage_strides{2, 1, 2, 1};
  int blocks_per_stage = 2;

  int output_channels() const { return stage_channels.back(); }
  int total_stride() const;
  // Smallest input extent for which a 24 px reference maps to a 3x3 kernel.
  static constexpr int kMinInputExtent = 24;

  // Uniform-width variant used for double-precision gradient checks.
  static BackboneConfig uniform(int channels);

  bool operator==(const BackboneConfig&) const = default;
};

template <typename T>
struct ConvBn {
  ConvParams<T> conv;
  BatchNormParams<T> bn;
};

template <typename T>
struct ResidualBlock {
  ConvBn<T> first;
  ConvBn<T> second;
  std::optional<ConvBn<T>> projection;
};

template <typename T>
struct ConvBnGrads {
  BasicTensor<T> weight;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

template <typename T>
struct BlockGrads {
  ConvBnGrads<T> first;
  ConvBnGrads<T> second;
  std::optional<ConvBnGrads<T>> projection;
};

// Gradient buffers with the same layout as the learnable parameters.
template <typename T>
struct BackboneGrads {
  ConvBnGrads<T> stem;
  std::vector<BlockGrads<T>> blocks;

  void zero();

  template <typename F>
  void for_each(F&& f) {
    auto visit = [&](const std::string& prefix, ConvBnGrads<T>& g) {
      f(prefix + ".conv.weight", g.weight);
      f(prefix + ".bn.gamma", g.gamma);
      f(prefix + ".bn.beta", g.beta);
    };
    visit("stem", stem);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = "block" + std::to_string(i);
      visit(p + ".first", blocks[i].first);
      visit(p + ".second", blocks[i].second);
      if (blocks[i].projection) visit(p + ".projection", *blocks[i].projection);
    }
  }
};

// Saved activations from one forward call, one entry per input group.
template <typename T>
struct ConvBnTrace {
  std::vector<ConvCache<T>> conv;
  BatchNormCache<T> bn;
};

template <typename T>
struct BlockTrace {
  ConvBnTrace<T> first;
  ConvBnTrace<T> second;
  std::optional<ConvBnTrace<T>> projection;
  std::vector<BasicTensor<T>> output;
};

template <typename T>
struct BackboneTrace {
  Mode mode = Mode::kEval;
  ConvBnTrace<T> stem;
  std::vector<BasicTensor<T>> stem_output;
  std::vector<BlockTrace<T>> blocks;

  bool empty() const { return stem_output.empty(); }
};

template <typename T>
class Backbone {
 public:
  Backbone() = default;

  // He fan-in initialization for conv weights, gamma = 1, beta = 0.
  static Backbone build(const BackboneConfig& config, std::uint64_t seed);

  const BackboneConfig& config() const { return config_; }

  // Runs every group through the network. In train mode the batchnorm
  // statistics are pooled across all groups; running statistics are left
  // untouched until commit_running_stats().
  std::vector<BasicTensor<T>> forward(std::span<const BasicTensor<T>> groups, Mode mode,
                                      BackboneTrace<T>* trace = nullptr) const;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode, BackboneTrace<T>* trace = nullptr) const;

  // Accumulates parameter gradients into `grads`. No input gradient.
  void backward(std::span<const BasicTensor<T>> grad_out, const BackboneTrace<T>& trace,
                BackboneGrads<T>& grads) const;

  void commit_running_stats(const BackboneTrace<T>& trace);

  BackboneGrads<T> zero_grads() const;

  // Learnable tensors in declaration order: (name, tensor).
  template <typename F>
  void for_each_parameter(F&& f) {
    for_each_layer([&](const std::string& prefix, ConvBn<T>& l) {
      f(prefix + ".conv.weight", l.conv.weight);
      f(prefix + ".bn.gamma", l.bn.gamma);
      f(prefix + ".bn.beta", l.bn.beta);
    });
  }

  // Every serialized tensor, learnable or not, in declaration order.
  template <typename F>
  void for_each_tensor(F&& f) {
    for_each_layer([&](const std::string& prefix, ConvBn<T>& l) {
      f(prefix + ".conv.weight", l.conv.weight);
      f(prefix + ".bn.gamma", l.bn.gamma);
      f(prefix + ".bn.beta", l.bn.beta);
      f(prefix + ".bn.running_mean", l.bn.running_mean);
      f(prefix + ".bn.running_var", l.bn.running_var);
    });
  }

  template <typename F>
  void for_each_layer(F&& f) {
    f(std::string("stem"), stem);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = "block" + std::to_string(i);
      f(p + ".first", blocks[i].first);
      f(p + ".second", blocks[i].second);
      if (blocks[i].projection) f(p + ".projection", *blocks[i].projection);
    }
  }

  template <typename U>
  Backbone<U> cast() const;

  // Per-block (channels, stride) in execution order, stem first.
  std::vector<std::pair<int, int>> layout() const;

  ConvBn<T> stem;
  std::vector<ResidualBlock<T>> blocks;

 private:
  template <typename U>
  friend class Backbone;

  BackboneConfig config_;
};

// Counts Backbone::forward invocations process-wide, for instrumentation.
std::uint64_t backbone_forward_count();

// Feature map N x c x ceil(H/8) x ceil(W/8) for an N x 1 x H x W image batch.
// Throws if H or W is below BackboneConfig::kMinInputExtent.
template <typename T>
BasicTensor<T> extract_features(const Backbone<T>& backbone, const BasicTensor<T>& image, Mode mode);

void check_input_extent(int height, int width);

// Inference-only copy of a backbone with every batchnorm folded into the
// preceding convolution's weights and bias.
class FoldedBackbone {
 public:
  struct Block {
    ConvParams<float> first;
    ConvParams<float> second;
    std::optional<ConvParams<float>> projection;
  };

  Tensor forward(const Tensor& input) const;

  const BackboneConfig& config() const { return config_; }

  ConvParams<float> stem;
  std::vector<Block> blocks;

 private:
  friend FoldedBackbone fold_batchnorm(const Backbone<float>& backbone);
  BackboneConfig config_;
};

// Folds running statistics: w' = w * gamma / sqrt(var + eps),
// b' = beta - gamma * mean / sqrt(var + eps). Throws on var <= 0.
ConvParams<float> fold_conv_bn(const ConvBn<float>& layer);
FoldedBackbone fold_batchnorm(const Backbone<float>& backbone);

// ---------------------------------------------------------------------------

namespace detail {

template <typename U, typename T>
ConvBn<U> cast_layer(const ConvBn<T>& l) {
  ConvBn<U> out;
  out.conv.weight = l.conv.weight.template cast<U>();
  out.conv.bias.assign(l.conv.bias.begin(), l.conv.bias.end());
  out.conv.stride = l.conv.stride;
  out.bn.gamma = l.bn.gamma.template cast<U>();
  out.bn.beta = l.bn.beta.template cast<U>();
  out.bn.running_mean = l.bn.running_mean.template cast<U>();
  out.bn.running_var = l.bn.running_var.template cast<U>();
  out.bn.epsilon = static_cast<U>(l.bn.epsilon);
  out.bn.momentum = static_cast<U>(l.bn.momentum);
  return out;
}

}  // namespace detail

template <typename T>
template <typename U>
Backbone<U> Backbone<T>::cast() const {
  Backbone<U> out;
  out.config_ = config_;
  out.stem = detail::cast_layer<U>(stem);
  for (const auto& b : blocks) {
    ResidualBlock<U> nb;
    nb.first = detail::cast_layer<U>(b.first);
    nb.second = detail::cast_layer<U>(b.second);
    if (b.projection) nb.projection = detail::cast_layer<U>(*b.projection);
    out.blocks.push_back(std::move(nb));
  }
  return out;
}

}  // namespace siamedp
