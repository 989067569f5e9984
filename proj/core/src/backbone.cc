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

#include "siamedp/backbone.h"

#include <atomic>
#include <cmath>
#include <random>

namespace siamedp {
namespace {

std::atomic<std::uint64_t> g_forward_calls{0};

template <typename T>
ConvBn<T> make_conv_bn(int in, int out, int kernel, int stride, std::mt19937_64& rng) {
  ConvBn<T> layer;
  layer.conv.weight = BasicTensor<T>(Shape{out, in, kernel, kernel});
  layer.conv.stride = stride;
  const double fan_in = static_cast<double>(in) * kernel * kernel;
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  for (auto& w : layer.conv.weight.vec()) w = static_cast<T>(normal(rng));
  layer.bn = BatchNormParams<T>::identity(out);
  return layer;
}

template <typename T>
ConvBnGrads<T> zero_like(const ConvBn<T>& l) {
  return {BasicTensor<T>(l.conv.weight.shape()), BasicTensor<T>(l.bn.gamma.shape()),
          BasicTensor<T>(l.bn.beta.shape())};
}

template <typename T>
void add_into(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void relu_inplace(BasicTensor<T>& x) {
  for (auto& v : x.vec()) v = v > T(0) ? v : T(0);
}

// conv -> batchnorm (statistics pooled over groups) -> optional ReLU.
template <typename T>
std::vector<BasicTensor<T>> conv_bn_forward(const ConvBn<T>& layer, std::span<const BasicTensor<T>> xs, Mode mode,
                                            ConvBnTrace<T>* trace, bool relu) {
  std::vector<BasicTensor<T>> conv_out;
  conv_out.reserve(xs.size());
  if (trace != nullptr) trace->conv.resize(xs.size());
  for (std::size_t g = 0; g < xs.size(); ++g) {
    conv_out.push_back(conv2d_forward(xs[g], layer.conv, trace ? &trace->conv[g] : nullptr));
  }
  auto out = batchnorm_forward(std::span<const BasicTensor<T>>(conv_out), layer.bn, mode,
                               trace ? &trace->bn : nullptr);
  if (relu) {
    for (auto& y : out) relu_inplace(y);
  }
  return out;
}

// Gradient w.r.t. the layer input for each group; parameter grads accumulate.
template <typename T>
std::vector<BasicTensor<T>> conv_bn_backward(const ConvBn<T>& layer, std::span<const BasicTensor<T>> dy,
                                             const ConvBnTrace<T>& trace, ConvBnGrads<T>& grads,
                                             bool need_input_grad) {
  auto bn = batchnorm_backward(dy, trace.bn, layer.bn);
  add_into(grads.gamma, bn.gamma);
  add_into(grads.beta, bn.beta);
  std::vector<BasicTensor<T>> dx;
  dx.reserve(dy.size());
  for (std::size_t g = 0; g < dy.size(); ++g) {
    auto cg = conv2d_backward(bn.input[g], trace.conv[g], layer.conv, need_input_grad);
    add_into(grads.weight, cg.weight);
    dx.push_back(std::move(cg.input));
  }
  return dx;
}

template <typename T>
void commit(ConvBn<T>& layer, const ConvBnTrace<T>& trace) {
  update_running_stats(layer.bn, trace.bn);
}

}  // namespace

int BackboneConfig::total_stride() const {
  int s = stem_stride;
  for (int st : stage_strides) s *= st;
  return s;
}

BackboneConfig BackboneConfig::uniform(int channels) {
  BackboneConfig c;
  c.stem_channels = channels;
  c.stage_channels = {channels, channels, channels, channels};
  return c;
}

template <typename T>
void BackboneGrads<T>::zero() {
  for_each([](const std::string&, BasicTensor<T>& t) { t.zero(); });
}

template <typename T>
Backbone<T> Backbone<T>::build(const BackboneConfig& config, std::uint64_t seed) {
  if (config.blocks_per_stage < 1) throw Error("backbone: blocks_per_stage must be >= 1");
  std::mt19937_64 rng(seed);
  Backbone b;
  b.config_ = config;
  b.stem = make_conv_bn<T>(1, config.stem_channels, 3, config.stem_stride, rng);
  int in = config.stem_channels;
  for (int s = 0; s < 4; ++s) {
    const int out = config.stage_channels[s];
    for (int k = 0; k < config.blocks_per_stage; ++k) {
      const int stride = k == 0 ? config.stage_strides[s] : 1;
      ResidualBlock<T> block;
      block.first = make_conv_bn<T>(in, out, 3, stride, rng);
      block.second = make_conv_bn<T>(out, out, 3, 1, rng);
      if (stride != 1 || in != out) block.projection = make_conv_bn<T>(in, out, 1, stride, rng);
      b.blocks.push_back(std::move(block));
      in = out;
    }
  }
  return b;
}

template <typename T>
std::vector<std::pair<int, int>> Backbone<T>::layout() const {
  std::vector<std::pair<int, int>> out;
  out.emplace_back(stem.conv.out_channels(), stem.conv.stride);
  for (const auto& b : blocks) out.emplace_back(b.first.conv.out_channels(), b.first.conv.stride);
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> Backbone<T>::forward(std::span<const BasicTensor<T>> groups, Mode mode,
                                                 BackboneTrace<T>* trace) const {
  g_forward_calls.fetch_add(1, std::memory_order_relaxed);
  for (const auto& g : groups) {
    require_rank4(g.shape(), "backbone");
    if (g.c() != 1) throw ShapeError("backbone: expected single-channel input, got " + g.shape().str());
  }
  if (trace != nullptr) {
    *trace = BackboneTrace<T>{};
    trace->mode = mode;
    trace->blocks.resize(blocks.size());
  }

  auto x = conv_bn_forward(stem, groups, mode, trace ? &trace->stem : nullptr, true);
  if (trace != nullptr) trace->stem_output = x;

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& block = blocks[i];
    BlockTrace<T>* bt = trace ? &trace->blocks[i] : nullptr;
    std::span<const BasicTensor<T>> in(x);
    auto h = conv_bn_forward(block.first, in, mode, bt ? &bt->first : nullptr, true);
    auto y = conv_bn_forward(block.second, std::span<const BasicTensor<T>>(h), mode, bt ? &bt->second : nullptr,
                             false);
    if (block.projection) {
      if (bt != nullptr) bt->projection.emplace();
      auto shortcut = conv_bn_forward(*block.projection, in, mode, bt ? &*bt->projection : nullptr, false);
      for (std::size_t g = 0; g < y.size(); ++g) add_into(y[g], shortcut[g]);
    } else {
      for (std::size_t g = 0; g < y.size(); ++g) add_into(y[g], x[g]);
    }
    for (auto& t : y) relu_inplace(t);
    if (bt != nullptr) bt->output = y;
    x = std::move(y);
  }
  return x;
}

template <typename T>
BasicTensor<T> Backbone<T>::forward(const BasicTensor<T>& input, Mode mode, BackboneTrace<T>* trace) const {
  auto out = forward(std::span<const BasicTensor<T>>(&input, 1), mode, trace);
  return std::move(out.front());
}

template <typename T>
void Backbone<T>::backward(std::span<const BasicTensor<T>> grad_out, const BackboneTrace<T>& trace,
                           BackboneGrads<T>& grads) const {
  if (trace.empty() || trace.blocks.size() != blocks.size()) {
    throw Error("backbone backward: no saved forward trace");
  }
  if (grad_out.size() != trace.stem_output.size()) {
    throw ShapeError("backbone backward: group count differs from forward");
  }
  std::vector<BasicTensor<T>> d(grad_out.begin(), grad_out.end());
  for (std::size_t i = blocks.size(); i-- > 0;) {
    const auto& block = blocks[i];
    const auto& bt = trace.blocks[i];
    auto& bg = grads.blocks[i];
    std::vector<BasicTensor<T>> ds;
    ds.reserve(d.size());
    for (std::size_t g = 0; g < d.size(); ++g) ds.push_back(relu_backward(d[g], bt.output[g]));

    auto dh = conv_bn_backward(block.second, std::span<const BasicTensor<T>>(ds), bt.second, bg.second, true);
    for (std::size_t g = 0; g < dh.size(); ++g) dh[g] = relu_backward(dh[g], bt.second.conv[g].input);
    auto dx = conv_bn_backward(block.first, std::span<const BasicTensor<T>>(dh), bt.first, bg.first, true);

    if (block.projection) {
      auto dp = conv_bn_backward(*block.projection, std::span<const BasicTensor<T>>(ds), *bt.projection,
                                 *bg.projection, true);
      for (std::size_t g = 0; g < dx.size(); ++g) add_into(dx[g], dp[g]);
    } else {
      for (std::size_t g = 0; g < dx.size(); ++g) add_into(dx[g], ds[g]);
    }
    d = std::move(dx);
  }
  for (std::size_t g = 0; g < d.size(); ++g) d[g] = relu_backward(d[g], trace.stem_output[g]);
  conv_bn_backward(stem, std::span<const BasicTensor<T>>(d), trace.stem, grads.stem, false);
}

template <typename T>
void Backbone<T>::commit_running_stats(const BackboneTrace<T>& trace) {
  if (trace.mode != Mode::kTrain) return;
  commit(stem, trace.stem);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    commit(blocks[i].first, trace.blocks[i].first);
    commit(blocks[i].second, trace.blocks[i].second);
    if (blocks[i].projection) commit(*blocks[i].projection, *trace.blocks[i].projection);
  }
}

template <typename T>
BackboneGrads<T> Backbone<T>::zero_grads() const {
  BackboneGrads<T> g;
  g.stem = zero_like(stem);
  for (const auto& b : blocks) {
    BlockGrads<T> bg{zero_like(b.first), zero_like(b.second), std::nullopt};
    if (b.projection) bg.projection = zero_like(*b.projection);
    g.blocks.push_back(std::move(bg));
  }
  return g;
}

std::uint64_t backbone_forward_count() { return g_forward_calls.load(); }

void check_input_extent(int height, int width) {
  const int m = BackboneConfig::kMinInputExtent;
  if (height < m || width < m) {
    throw ShapeError("input " + std::to_string(height) + "x" + std::to_string(width) +
                     " is below the minimum extent of " + std::to_string(m) + " pixels");
  }
}

template <typename T>
BasicTensor<T> extract_features(const Backbone<T>& backbone, const BasicTensor<T>& image, Mode mode) {
  require_rank4(image.shape(), "extract_features");
  check_input_extent(image.h(), image.w());
  return backbone.forward(image, mode);
}

ConvParams<float> fold_conv_bn(const ConvBn<float>& layer) {
  ConvParams<float> out;
  out.stride = layer.conv.stride;
  out.weight = layer.conv.weight;
  const int channels = layer.conv.out_channels();
  const std::size_t per_out = out.weight.size() / channels;
  out.bias.assign(channels, 0.0f);
  for (int c = 0; c < channels; ++c) {
    const double var = layer.bn.running_var[c];
    if (!(var > 0.0)) throw Error("fold_batchnorm: running variance must be positive");
    const double scale = layer.bn.gamma[c] / std::sqrt(var + layer.bn.epsilon);
    float* w = out.weight.data() + c * per_out;
    for (std::size_t k = 0; k < per_out; ++k) w[k] = static_cast<float>(w[k] * scale);
    out.bias[c] = static_cast<float>(layer.bn.beta[c] - scale * layer.bn.running_mean[c]);
  }
  return out;
}

FoldedBackbone fold_batchnorm(const Backbone<float>& backbone) {
  FoldedBackbone f;
  f.config_ = backbone.config();
  f.stem = fold_conv_bn(backbone.stem);
  for (const auto& b : backbone.blocks) {
    FoldedBackbone::Block fb{fold_conv_bn(b.first), fold_conv_bn(b.second), std::nullopt};
    if (b.projection) fb.projection = fold_conv_bn(*b.projection);
    f.blocks.push_back(std::move(fb));
  }
  return f;
}

Tensor FoldedBackbone::forward(const Tensor& input) const {
  g_forward_calls.fetch_add(1, std::memory_order_relaxed);
  require_rank4(input.shape(), "folded backbone");
  Tensor x = conv2d_forward(input, stem);
  relu_inplace(x);
  for (const auto& b : blocks) {
    Tensor h = conv2d_forward(x, b.first);
    relu_inplace(h);
    Tensor y = conv2d_forward(h, b.second);
    if (b.projection) {
      add_into(y, conv2d_forward(x, *b.projection));
    } else {
      add_into(y, x);
    }
    relu_inplace(y);
    x = std::move(y);
  }
  return x;
}

template struct BackboneGrads<float>;
template struct BackboneGrads<double>;
template class Backbone<float>;
template class Backbone<double>;
template BasicTensor<float> extract_features(const Backbone<float>&, const BasicTensor<float>&, Mode);
template BasicTensor<double> extract_features(const Backbone<double>&, const BasicTensor<double>&, Mode);

}  // namespace siamedp
