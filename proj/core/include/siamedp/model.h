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

#include "siamedp/backbone.h"
#include "siamedp/image.h"
#include "siamedp/losses.h"
#include "siamedp/siamese_head.h"

namespace siamedp {

enum class Side { kRight, kLeft };

// Shared backbone, offset regressor, and the per-side reference features the
// detector correlates against. ref_right and ref_left are 1 x c x 3 x 3.
template <typename T>
struct DetectorModelT {
  Backbone<T> backbone;
  RegressionHead<T> head;
  GrayImage reference_image;  // 24 x 24, subject's right eye
  BasicTensor<T> ref_right;
  BasicTensor<T> ref_left;
  T alpha = T(8);
  CosFaceParams cosface;
};
using DetectorModel = DetectorModelT<float>;

// Fresh model: He-initialized backbone, zero regression head, reference
// features computed in eval mode.
DetectorModel make_model(const BackboneConfig& config, std::uint64_t seed, const GrayImage& reference_image);

// The right side uses the image as-is, the left side its horizontal mirror.
// Throws unless the image is 24 x 24.
template <typename T>
BasicTensor<T> build_reference_feature(const Backbone<T>& backbone, const GrayImage& reference_image, Side side,
                                       Mode mode = Mode::kEval);

// 2 x 1 x 24 x 24 batch holding the reference image and its mirror.
template <typename T>
BasicTensor<T> reference_pair(const GrayImage& reference_image);

// Recomputes ref_right and ref_left from the backbone in eval mode.
template <typename T>
void refresh_reference_features(DetectorModelT<T>& model);

// One backbone forward pass, two similarity maps, argmax, regression. When
// `folded` is given it replaces the eval-mode backbone.
DetectionPair detect(const DetectorModel& model, const GrayImage& image, const FoldedBackbone* folded = nullptr);

// Detections for sample `sample` of an already-extracted feature map.
template <typename T>
Detection detect_side(const BasicTensor<T>& features, const BasicTensor<T>& ref, const RegressionHead<T>& head,
                      T alpha, int sample, int width, int height);

}  // namespace siamedp
