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

#include "siamedp/model.h"


#include "siamedp/error.h"
#include "siamedp/reference.h"

namespace siamedp {

template <typename T>
BasicTensor<T> reference_pair(const GrayImage& reference_image) {
  if (reference_image.width != kReferenceSize || reference_image.height != kReferenceSize) {
    throw ShapeError("reference image must be " + std::to_string(kReferenceSize) + "x" +
                     std::to_string(kReferenceSize) + ", got " + std::to_string(reference_image.width) + "x" +
                     std::to_string(reference_image.height));
  }
  const GrayImage mirrored = flip_horizontal(reference_image);
  return to_batch({&reference_image, &mirrored}).template cast<T>();
}

template <typename T>
BasicTensor<T> build_reference_feature(const Backbone<T>& backbone, const GrayImage& reference_image, Side side,
                                       Mode mode) {
  const BasicTensor<T> pair = reference_pair<T>(reference_image);
  const BasicTensor<T> image = pair.slice(side == Side::kRight ? 0 : 1, 1);
  return backbone.forward(image, mode);
}

template <typename T>
void refresh_reference_features(DetectorModelT<T>& model) {
  const BasicTensor<T> features = model.backbone.forward(reference_pair<T>(model.reference_image), Mode::kEval);
  model.ref_right = features.slice(0, 1);
  model.ref_left = features.slice(1, 1);
}

DetectorModel make_model(const BackboneConfig& config, std::uint64_t seed, const GrayImage& reference_image) {
  DetectorModel model;
  model.backbone = Backbone<float>::build(config, seed);
  model.head = RegressionHead<float>::zeros(config.output_channels());
  model.reference_image = reference_image;
  model.alpha = static_cast<float>(config.total_stride());
  refresh_reference_features(model);
  return model;
}

template <typename T>
Detection detect_side(const BasicTensor<T>& features, const BasicTensor<T>& ref, const RegressionHead<T>& head,
                      T alpha, int sample, int width, int height) {
  const HeatMap<T> q = similarity_map(features, ref, sample, alpha);
  Detection d;
  d.coarse = argmax_heatmap(q);
  d.score = static_cast<double>(q.at(d.coarse.row, d.coarse.col));
  const Vec2T<T> dx = regress_offset(head, extract_eye_feature(features, d.coarse, sample));
  d.offset = {static_cast<double>(dx.x), static_cast<double>(dx.y)};
  const Vec2T<T> raw = compose_position(d.coarse, dx, alpha);
  d.raw_position = {static_cast<double>(raw.x), static_cast<double>(raw.y)};
  d.position = clamp_to_image(d.raw_position, width, height);
  return d;
}

DetectionPair detect(const DetectorModel& model, const GrayImage& image, const FoldedBackbone* folded) {
  check_input_extent(image.height, image.width);
  if (model.ref_right.empty() || model.ref_left.empty()) throw Error("detect: model has no reference features");
  const Tensor input = to_tensor(image);
  const Tensor features = folded ? folded->forward(input) : model.backbone.forward(input, Mode::kEval);
  DetectionPair out;
  out.right = detect_side(features, model.ref_right, model.head, model.alpha, 0, image.width, image.height);
  out.left = detect_side(features, model.ref_left, model.head, model.alpha, 0, image.width, image.height);
  return out;
}

#define SIAMEDP_INSTANTIATE_MODEL(T)                                                                         \
  template BasicTensor<T> reference_pair<T>(const GrayImage&);                                              \
  template BasicTensor<T> build_reference_feature(const Backbone<T>&, const GrayImage&, Side, Mode);       \
  template void refresh_reference_features(DetectorModelT<T>&);                                            \
  template Detection detect_side(const BasicTensor<T>&, const BasicTensor<T>&, const RegressionHead<T>&, T, \
                                 int, int, int);

SIAMEDP_INSTANTIATE_MODEL(float)
SIAMEDP_INSTANTIATE_MODEL(double)

}  // namespace siamedp
