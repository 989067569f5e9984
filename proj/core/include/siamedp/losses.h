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

#include <cstdint>
#include <string>
#include <vector>

#include "siamedp/siamese_head.h"

namespace siamedp {

// How the per-cell probabilities of the cosine-margin heat-map loss are
// normalized. With logits a_t = s Q_t and margin logits a+_t = s (Q_t - m):
//
//  kSharedDenominator: every cell u uses D_u = e^{a+_u} + sum_{t != u} e^{a_t};
//    positives score log(e^{a+_u} / D_u), negatives log(e^{a_u} / D_u). The
//    gradient of this form does not depend on the labels, so it cannot
//    localize anything on its own; it is kept for reference evaluation.
//  kOppositeClass: a positive cell competes with the negative cells,
//    p+_u = e^{a+_u} / (e^{a+_u} + sum_{t in N} e^{a_t}); a negative cell
//    competes with the positive cells, p-_u = e^{a_u} / (e^{a_u} +
//    sum_{t in P} e^{a+_t}), and contributes log(1 - p-_u). Strictly
//    decreasing in every positive similarity and increasing in every negative
//    one. Used for training.
//
// Both are averaged over all cells with a leading minus.
enum class CosFaceForm { kSharedDenominator, kOppositeClass };

std::string to_string(CosFaceForm form);
CosFaceForm cosface_form_from_string(const std::string& name);

struct CosFaceParams {
  double scale = 30.0;
  double margin = 0.1;
  CosFaceForm form = CosFaceForm::kOppositeClass;

  void validate() const;
};

// Binary label grid: the eye-centre cell and its 4-neighbours, clipped to
// the grid.
struct GroundTruthHeatMap {
  int rows = 0;
  int cols = 0;
  Cell center;
  std::vector<std::uint8_t> labels;

  bool positive(int row, int col) const { return labels[static_cast<std::size_t>(row) * cols + col] != 0; }
  int positives() const;
};

struct LossWeights {
  double heatmap = 1.0;   // beta
  double position = 1.0;  // gamma
};

// round(p / alpha) per axis, clamped to the grid.
Cell quantize_to_cell(Vec2 pixel, double alpha, int rows, int cols);

GroundTruthHeatMap gt_heatmap(Vec2 gt_pixel, double alpha, int rows, int cols);

template <typename T>
T cosface_bce(const HeatMap<T>& q, const GroundTruthHeatMap& y, const CosFaceParams& params);

// dL/dQ, same layout as q.values.
template <typename T>
std::vector<T> cosface_bce_backward(const HeatMap<T>& q, const GroundTruthHeatMap& y, const CosFaceParams& params);

// 1 when the predicted and true cells are closer than 2 cells, else 0.
int position_mask(Cell predicted, Cell truth);

// b * (|x - x^| + |y - y^|) / alpha, positions in input pixels.
template <typename T>
T regression_loss(Vec2T<T> predicted, Vec2 truth, int mask, T alpha);

// d(regression_loss)/d(predicted); zero where the residual is exactly zero.
template <typename T>
Vec2T<T> regression_loss_grad(Vec2T<T> predicted, Vec2 truth, int mask, T alpha);

struct LossComponents {
  double heat_right = 0.0;
  double heat_left = 0.0;
  double pos_right = 0.0;
  double pos_left = 0.0;
};

// beta (Ls_R + Ls_L) + gamma (Lp_R + Lp_L)
double total_loss(const LossComponents& parts, const LossWeights& weights);

}  // namespace siamedp
