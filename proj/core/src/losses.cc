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

#include "siamedp/losses.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "siamedp/error.h"

namespace siamedp {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
void check_shapes(const HeatMap<T>& q, const GroundTruthHeatMap& y) {
  if (q.rows != y.rows || q.cols != y.cols || q.values.size() != y.labels.size()) {
    throw ShapeError("cosface_bce: heat map " + std::to_string(q.rows) + "x" + std::to_string(q.cols) +
                     " vs labels " + std::to_string(y.rows) + "x" + std::to_string(y.cols));
  }
}

// log(e^{a_u - sm} + sum_{t != u} e^{a_t}) for every u.
std::vector<double> shared_log_denominators(const std::vector<double>& a, double sm) {
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t u = 0; u < n; ++u) {
    double mx = a[u] - sm;
    for (std::size_t t = 0; t < n; ++t) {
      if (t != u) mx = std::max(mx, a[t]);
    }
    double sum = std::exp(a[u] - sm - mx);
    for (std::size_t t = 0; t < n; ++t) {
      if (t != u) sum += std::exp(a[t] - mx);
    }
    out[u] = mx + std::log(sum);
  }
  return out;
}

struct OppositeTerms {
  std::vector<double> z;  // argument of softplus per cell
  double lse_neg = kNegInf;
  double lse_pos = kNegInf;
};

double log_sum_exp(const std::vector<double>& xs) {
  if (xs.empty()) return kNegInf;
  const double mx = *std::max_element(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

OppositeTerms opposite_terms(const std::vector<double>& a, const GroundTruthHeatMap& y, double sm) {
  std::vector<double> neg, pos;
  for (std::size_t u = 0; u < a.size(); ++u) {
    if (y.labels[u]) {
      pos.push_back(a[u] - sm);
    } else {
      neg.push_back(a[u]);
    }
  }
  if (pos.empty()) throw Error("cosface_bce: label map has no positive cell");
  OppositeTerms t;
  t.lse_neg = log_sum_exp(neg);
  t.lse_pos = log_sum_exp(pos);
  t.z.resize(a.size());
  for (std::size_t u = 0; u < a.size(); ++u) {
    t.z[u] = y.labels[u] ? t.lse_neg - (a[u] - sm) : a[u] - t.lse_pos;
  }
  return t;
}

template <typename T>
std::vector<double> logits(const HeatMap<T>& q, double s) {
  std::vector<double> a(q.values.size());
  for (std::size_t u = 0; u < a.size(); ++u) a[u] = s * static_cast<double>(q.values[u]);
  return a;
}

}  // namespace

std::string to_string(CosFaceForm form) {
  return form == CosFaceForm::kSharedDenominator ? "shared" : "opposite";
}

CosFaceForm cosface_form_from_string(const std::string& name) {
  if (name == "shared") return CosFaceForm::kSharedDenominator;
  if (name == "opposite") return CosFaceForm::kOppositeClass;
  throw Error("unknown cosface form '" + name + "' (expected 'shared' or 'opposite')");
}

void CosFaceParams::validate() const {
  if (!(scale > 0.0)) throw Error("cosface scale must be positive");
  if (!(margin >= 0.0 && margin < 1.0)) throw Error("cosface margin must lie in [0, 1)");
}

int GroundTruthHeatMap::positives() const {
  return static_cast<int>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

Cell quantize_to_cell(Vec2 pixel, double alpha, int rows, int cols) {
  int col = static_cast<int>(std::lround(pixel.x / alpha));
  int row = static_cast<int>(std::lround(pixel.y / alpha));
  return {std::clamp(col, 0, cols - 1), std::clamp(row, 0, rows - 1)};
}

GroundTruthHeatMap gt_heatmap(Vec2 gt_pixel, double alpha, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw ShapeError("gt_heatmap: empty grid");
  GroundTruthHeatMap y;
  y.rows = rows;
  y.cols = cols;
  y.center = quantize_to_cell(gt_pixel, alpha, rows, cols);
  y.labels.assign(static_cast<std::size_t>(rows) * cols, 0);
  constexpr int kOffsets[5][2] = {{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  for (const auto& o : kOffsets) {
    const int r = y.center.row + o[0];
    const int c = y.center.col + o[1];
    if (r >= 0 && r < rows && c >= 0 && c < cols) y.labels[static_cast<std::size_t>(r) * cols + c] = 1;
  }
  return y;
}

template <typename T>
T cosface_bce(const HeatMap<T>& q, const GroundTruthHeatMap& y, const CosFaceParams& params) {
  check_shapes(q, y);
  params.validate();
  const double s = params.scale;
  const double sm = s * params.margin;
  const auto a = logits(q, s);
  const double count = static_cast<double>(a.size());
  double total = 0.0;
  if (params.form == CosFaceForm::kSharedDenominator) {
    const auto log_d = shared_log_denominators(a, sm);
    for (std::size_t u = 0; u < a.size(); ++u) {
      const double num = y.labels[u] ? a[u] - sm : a[u];
      total += log_d[u] - num;
    }
  } else {
    const auto terms = opposite_terms(a, y, sm);
    for (double z : terms.z) total += softplus(z);
  }
  return static_cast<T>(total / count);
}

template <typename T>
std::vector<T> cosface_bce_backward(const HeatMap<T>& q, const GroundTruthHeatMap& y, const CosFaceParams& params) {
  check_shapes(q, y);
  params.validate();
  const double s = params.scale;
  const double sm = s * params.margin;
  const auto a = logits(q, s);
  const std::size_t n = a.size();
  const double inv_count = 1.0 / static_cast<double>(n);
  std::vector<double> da(n, 0.0);

  if (params.form == CosFaceForm::kSharedDenominator) {
    const auto log_d = shared_log_denominators(a, sm);
    for (std::size_t u = 0; u < n; ++u) {
      da[u] -= 1.0;
      for (std::size_t k = 0; k < n; ++k) {
        da[k] += k == u ? std::exp(a[u] - sm - log_d[u]) : std::exp(a[k] - log_d[u]);
      }
    }
  } else {
    const auto terms = opposite_terms(a, y, sm);
    double pos_pull = 0.0;  // sum of sigmoid(z) over positives
    double neg_push = 0.0;  // sum of sigmoid(z) over negatives
    for (std::size_t u = 0; u < n; ++u) {
      const double sg = sigmoid(terms.z[u]);
      if (y.labels[u]) {
        da[u] -= sg;
        pos_pull += sg;
      } else {
        da[u] += sg;
        neg_push += sg;
      }
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (y.labels[t]) {
        da[t] -= neg_push * std::exp(a[t] - sm - terms.lse_pos);
      } else {
        da[t] += pos_pull * std::exp(a[t] - terms.lse_neg);
      }
    }
  }

  std::vector<T> grad(n);
  for (std::size_t u = 0; u < n; ++u) grad[u] = static_cast<T>(s * da[u] * inv_count);
  return grad;
}

int position_mask(Cell predicted, Cell truth) {
  const double dx = predicted.col - truth.col;
  const double dy = predicted.row - truth.row;
  return std::sqrt(dx * dx + dy * dy) < 2.0 ? 1 : 0;
}

template <typename T>
T regression_loss(Vec2T<T> predicted, Vec2 truth, int mask, T alpha) {
  if (mask == 0) return T(0);
  return (std::abs(predicted.x - static_cast<T>(truth.x)) + std::abs(predicted.y - static_cast<T>(truth.y))) / alpha;
}

template <typename T>
Vec2T<T> regression_loss_grad(Vec2T<T> predicted, Vec2 truth, int mask, T alpha) {
  if (mask == 0) return {};
  auto sign = [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); };
  return {sign(predicted.x - static_cast<T>(truth.x)) / alpha, sign(predicted.y - static_cast<T>(truth.y)) / alpha};
}

double total_loss(const LossComponents& parts, const LossWeights& weights) {
  return weights.heatmap * (parts.heat_right + parts.heat_left) + weights.position * (parts.pos_right + parts.pos_left);
}

template float cosface_bce(const HeatMap<float>&, const GroundTruthHeatMap&, const CosFaceParams&);
template double cosface_bce(const HeatMap<double>&, const GroundTruthHeatMap&, const CosFaceParams&);
template std::vector<float> cosface_bce_backward(const HeatMap<float>&, const GroundTruthHeatMap&,
                                                 const CosFaceParams&);
template std::vector<double> cosface_bce_backward(const HeatMap<double>&, const GroundTruthHeatMap&,
                                                  const CosFaceParams&);
template float regression_loss(Vec2T<float>, Vec2, int, float);
template double regression_loss(Vec2T<double>, Vec2, int, double);
template Vec2T<float> regression_loss_grad(Vec2T<float>, Vec2, int, float);
template Vec2T<double> regression_loss_grad(Vec2T<double>, Vec2, int, double);

}  // namespace siamedp
