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

#include "siamedp/siamese_head.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace siamedp {
namespace {

struct SimGeometry {
  int channels, rows, cols, kh, kw;
};

template <typename T>
SimGeometry check_similarity(const BasicTensor<T>& search, const BasicTensor<T>& ref, int sample) {
  require_rank4(search.shape(), "similarity_map search");
  require_rank4(ref.shape(), "similarity_map reference");
  if (ref.n() != 1) throw ShapeError("similarity_map: reference must hold one sample");
  if (sample < 0 || sample >= search.n()) throw ShapeError("similarity_map: sample index out of range");
  if (ref.c() != search.c()) {
    throw ShapeError("similarity_map: channel mismatch, search " + std::to_string(search.c()) + " vs reference " +
                     std::to_string(ref.c()));
  }
  if (ref.h() % 2 == 0 || ref.w() % 2 == 0) {
    throw ShapeError("similarity_map: reference kernel must have odd extents, got " + ref.shape().str());
  }
  return {search.c(), search.h(), search.w(), ref.h(), ref.w()};
}

// Row-major index of the replicated search cell for kernel tap (i, j) at u.
inline int tap_row(int row, int i, const SimGeometry& g) { return std::clamp(row + i - g.kh / 2, 0, g.rows - 1); }
inline int tap_col(int col, int j, const SimGeometry& g) { return std::clamp(col + j - g.kw / 2, 0, g.cols - 1); }

template <typename T>
void dot_and_norms(const T* fs, const T* fr, const SimGeometry& g, std::vector<double>& dots,
                   std::vector<double>& patch_sq, double& ref_sq) {
  const std::size_t plane = static_cast<std::size_t>(g.rows) * g.cols;
  const std::size_t kplane = static_cast<std::size_t>(g.kh) * g.kw;
  dots.assign(plane, 0.0);
  patch_sq.assign(plane, 0.0);
  ref_sq = 0.0;
  std::vector<double> cell_sq(plane, 0.0);
  for (int c = 0; c < g.channels; ++c) {
    const T* s = fs + c * plane;
    for (std::size_t k = 0; k < plane; ++k) cell_sq[k] += static_cast<double>(s[k]) * s[k];
  }
  for (int c = 0; c < g.channels; ++c) {
    const T* s = fs + c * plane;
    const T* r = fr + c * kplane;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const double rv = r[i * g.kw + j];
        ref_sq += rv * rv;
        for (int row = 0; row < g.rows; ++row) {
          const T* line = s + static_cast<std::size_t>(tap_row(row, i, g)) * g.cols;
          double* out = dots.data() + static_cast<std::size_t>(row) * g.cols;
          for (int col = 0; col < g.cols; ++col) out[col] += rv * line[tap_col(col, j, g)];
        }
      }
    }
  }
  for (int row = 0; row < g.rows; ++row) {
    for (int col = 0; col < g.cols; ++col) {
      double sum = 0.0;
      for (int i = 0; i < g.kh; ++i) {
        for (int j = 0; j < g.kw; ++j) {
          sum += cell_sq[static_cast<std::size_t>(tap_row(row, i, g)) * g.cols + tap_col(col, j, g)];
        }
      }
      patch_sq[static_cast<std::size_t>(row) * g.cols + col] = sum;
    }
  }
}

}  // namespace

template <typename T>
HeatMap<T> similarity_map(const BasicTensor<T>& search, const BasicTensor<T>& ref, int sample, T alpha) {
  const SimGeometry g = check_similarity(search, ref, sample);
  std::vector<double> dots, patch_sq;
  double ref_sq = 0.0;
  dot_and_norms(search.sample(sample), ref.data(), g, dots, patch_sq, ref_sq);

  HeatMap<T> q;
  q.rows = g.rows;
  q.cols = g.cols;
  q.alpha = alpha;
  q.values.resize(dots.size());
  const double ref_norm = std::sqrt(ref_sq);
  for (std::size_t u = 0; u < dots.size(); ++u) {
    const double denom = ref_norm * std::sqrt(patch_sq[u]);
    const double v = denom > 0.0 ? dots[u] / denom : 0.0;
    q.values[u] = static_cast<T>(std::clamp(v, -1.0, 1.0));
  }
  return q;
}

template <typename T>
SimilarityGrads<T> similarity_map_backward(const std::vector<T>& grad_q, const BasicTensor<T>& search,
                                           const BasicTensor<T>& ref, int sample) {
  const SimGeometry g = check_similarity(search, ref, sample);
  const std::size_t plane = static_cast<std::size_t>(g.rows) * g.cols;
  const std::size_t kplane = static_cast<std::size_t>(g.kh) * g.kw;
  if (grad_q.size() != plane) throw ShapeError("similarity_map_backward: gradient size does not match heat map");

  std::vector<double> dots, patch_sq;
  double ref_sq = 0.0;
  const T* fs = search.sample(sample);
  const T* fr = ref.data();
  dot_and_norms(fs, fr, g, dots, patch_sq, ref_sq);
  const double ref_norm = std::sqrt(ref_sq);

  // dQ/dpatch = ref / (|r||p|) - Q p / |p|^2 ; dQ/dref = p / (|r||p|) - Q r / |r|^2
  std::vector<double> a(plane, 0.0);  // coefficient on ref for the patch gradient
  std::vector<double> b(plane, 0.0);  // coefficient on the patch itself
  double ref_self = 0.0;              // accumulated coefficient on r for dref
  for (std::size_t u = 0; u < plane; ++u) {
    const double pn = std::sqrt(patch_sq[u]);
    const double denom = ref_norm * pn;
    if (!(denom > 0.0) || grad_q[u] == T(0)) continue;
    const double q = dots[u] / denom;
    a[u] = grad_q[u] / denom;
    b[u] = -grad_q[u] * q / patch_sq[u];
    ref_self += -grad_q[u] * q / ref_sq;
  }

  SimilarityGrads<T> out;
  out.search = BasicTensor<T>::nchw(1, g.channels, g.rows, g.cols);
  out.ref = BasicTensor<T>(ref.shape());
  std::vector<double> dsearch(static_cast<std::size_t>(g.channels) * plane, 0.0);
  std::vector<double> dref(static_cast<std::size_t>(g.channels) * kplane, 0.0);

  for (int c = 0; c < g.channels; ++c) {
    const T* s = fs + c * plane;
    const T* r = fr + c * kplane;
    double* ds = dsearch.data() + c * plane;
    double* dr = dref.data() + c * kplane;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const double rv = r[i * g.kw + j];
        double acc = ref_self * rv;
        for (int row = 0; row < g.rows; ++row) {
          const std::size_t src_row = static_cast<std::size_t>(tap_row(row, i, g)) * g.cols;
          for (int col = 0; col < g.cols; ++col) {
            const std::size_t u = static_cast<std::size_t>(row) * g.cols + col;
            const std::size_t src = src_row + tap_col(col, j, g);
            const double sv = s[src];
            ds[src] += a[u] * rv + b[u] * sv;
            acc += a[u] * sv;
          }
        }
        dr[i * g.kw + j] = acc;
      }
    }
  }
  for (std::size_t k = 0; k < dsearch.size(); ++k) out.search[k] = static_cast<T>(dsearch[k]);
  for (std::size_t k = 0; k < dref.size(); ++k) out.ref[k] = static_cast<T>(dref[k]);
  return out;
}

template <typename T>
Cell argmax_heatmap(const HeatMap<T>& q) {
  if (q.values.empty()) throw ShapeError("argmax_heatmap: empty heat map");
  std::size_t best = 0;
  for (std::size_t u = 1; u < q.values.size(); ++u) {
    if (q.values[u] > q.values[best]) best = u;
  }
  return {static_cast<int>(best % q.cols), static_cast<int>(best / q.cols)};
}

template <typename T>
std::vector<T> extract_eye_feature(const BasicTensor<T>& search, Cell cell, int sample) {
  require_rank4(search.shape(), "extract_eye_feature");
  if (cell.row < 0 || cell.row >= search.h() || cell.col < 0 || cell.col >= search.w()) {
    throw ShapeError("extract_eye_feature: cell (" + std::to_string(cell.col) + ", " + std::to_string(cell.row) +
                     ") outside " + std::to_string(search.w()) + "x" + std::to_string(search.h()) + " map");
  }
  std::vector<T> f(search.c());
  for (int c = 0; c < search.c(); ++c) f[c] = search.at(sample, c, cell.row, cell.col);
  return f;
}

template <typename T>
Vec2T<T> regress_offset(const RegressionHead<T>& head, const std::vector<T>& feature) {
  if (head.weight.rank() != 2 || head.weight.shape()[0] != 2) throw ShapeError("regression head must be 2 x c");
  const int c = head.channels();
  if (static_cast<int>(feature.size()) != c) {
    throw ShapeError("regress_offset: feature length " + std::to_string(feature.size()) + " vs head width " +
                     std::to_string(c));
  }
  T dx = 0, dy = 0;
  for (int k = 0; k < c; ++k) {
    dx += head.weight[k] * feature[k];
    dy += head.weight[c + k] * feature[k];
  }
  return {dx, dy};
}

template <typename T>
Vec2T<T> compose_position(Cell cell, Vec2T<T> offset, T alpha) {
  return {alpha * (static_cast<T>(cell.col) + offset.x), alpha * (static_cast<T>(cell.row) + offset.y)};
}

Vec2 clamp_to_image(Vec2 p, int width, int height) {
  return {std::clamp(p.x, 0.0, static_cast<double>(width - 1)), std::clamp(p.y, 0.0, static_cast<double>(height - 1))};
}

#define SIAMEDP_INSTANTIATE_HEAD(T)                                                                              \
  template HeatMap<T> similarity_map(const BasicTensor<T>&, const BasicTensor<T>&, int, T);                     \
  template SimilarityGrads<T> similarity_map_backward(const std::vector<T>&, const BasicTensor<T>&,              \
                                                      const BasicTensor<T>&, int);                              \
  template Cell argmax_heatmap(const HeatMap<T>&);                                                               \
  template std::vector<T> extract_eye_feature(const BasicTensor<T>&, Cell, int);                                 \
  template Vec2T<T> regress_offset(const RegressionHead<T>&, const std::vector<T>&);                             \
  template Vec2T<T> compose_position(Cell, Vec2T<T>, T);

SIAMEDP_INSTANTIATE_HEAD(float)
SIAMEDP_INSTANTIATE_HEAD(double)

}  // namespace siamedp
