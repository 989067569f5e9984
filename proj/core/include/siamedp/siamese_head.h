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

#include <vector>

#include "siamedp/tensor.h"

namespace siamedp {

// Heat-map cell. col is the x axis, row the y axis, origin top-left.
struct Cell {
  int col = 0;
  int row = 0;
  bool operator==(const Cell&) const = default;
};

template <typename T>
struct Vec2T {
  T x = T(0);
  T y = T(0);
  bool operator==(const Vec2T&) const = default;
};
using Vec2 = Vec2T<double>;

// Cosine similarity grid. Values lie in [-1, 1]; alpha is the number of
// input pixels per cell.
template <typename T>
struct HeatMap {
  int rows = 0;
  int cols = 0;
  T alpha = T(8);
  std::vector<T> values;

  T at(int row, int col) const { return values[static_cast<std::size_t>(row) * cols + col]; }
  T& at(int row, int col) { return values[static_cast<std::size_t>(row) * cols + col]; }
  std::size_t size() const { return values.size(); }
};

// Q[u] = <ref, patch_u> / (|ref| |patch_u|), where patch_u is the
// kernel-sized neighbourhood of u in the search feature after edge
// replication, so Q has the search feature's spatial size. A zero-norm
// patch or reference gives 0. `search` is N x c x M x N' and `sample`
// selects the image; `ref` is 1 x c x m x n with m, n odd.
template <typename T>
HeatMap<T> similarity_map(const BasicTensor<T>& search, const BasicTensor<T>& ref, int sample = 0,
                          T alpha = T(8));

template <typename T>
struct SimilarityGrads {
  BasicTensor<T> search;  // 1 x c x M x N
  BasicTensor<T> ref;     // same shape as ref
};

template <typename T>
SimilarityGrads<T> similarity_map_backward(const std::vector<T>& grad_q, const BasicTensor<T>& search,
                                           const BasicTensor<T>& ref, int sample = 0);

// First maximal cell in row-major scan order.
template <typename T>
Cell argmax_heatmap(const HeatMap<T>& q);

// The 1 x 1 x c fiber of the search feature at `cell`.
template <typename T>
std::vector<T> extract_eye_feature(const BasicTensor<T>& search, Cell cell, int sample = 0);

// Linear offset regressor, weight 2 x c, no bias.
template <typename T>
struct RegressionHead {
  BasicTensor<T> weight;

  static RegressionHead zeros(int channels) { return {BasicTensor<T>(Shape{2, channels})}; }
  int channels() const { return weight.shape()[1]; }
};

// dx = w * f, in heat-map cell units.
template <typename T>
Vec2T<T> regress_offset(const RegressionHead<T>& head, const std::vector<T>& feature);

// x = alpha * (cell + dx), in input pixels (unclamped).
template <typename T>
Vec2T<T> compose_position(Cell cell, Vec2T<T> offset, T alpha);

Vec2 clamp_to_image(Vec2 p, int width, int height);

struct Detection {
  Cell coarse;
  Vec2 offset;
  Vec2 raw_position;  // unclamped alpha * (coarse + offset)
  Vec2 position;      // clamped to the image
  double score = 0.0; // peak similarity
};

struct DetectionPair {
  Detection right;
  Detection left;
};

}  // namespace siamedp
