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
#include <vector>

#include "siamedp/annotations.h"
#include "siamedp/image.h"

namespace siamedp {

// Parameters of the synthetic near-infrared partial-face generator.
struct SynthConfig {
  std::uint64_t seed = 1;
  int width = 128;
  int height = 96;
  double iris_radius_min = 4.0;
  double iris_radius_max = 7.0;
  double eye_distance_min = 44.0;  // pupil to pupil, pixels
  double eye_distance_max = 68.0;
  double max_roll_degrees = 10.0;
  double background_amplitude = 22.0;
  double noise_sigma = 4.0;
  double gaze_jitter = 0.35;  // pupil offset inside the opening, in iris radii

  // Throws when a range is empty or the largest eye pair cannot fit.
  void validate() const;
};

// Everything needed to re-render one eye.
struct EyeGeometry {
  Vec2 pupil;           // ground-truth centre
  Vec2 opening_center;  // centre of the lid opening
  double iris_radius = 5.0;
  double pupil_radius = 2.0;
  double half_width = 11.0;  // opening half-length along the eye axis
  double upper_height = 5.5;
  double lower_height = 4.5;
  double roll = 0.0;         // radians
  int nasal_sign = 1;        // +1: inner corner toward +x in image coordinates
  double sclera = 215.0;
  double iris = 90.0;
  double pupil_level = 20.0;
  double lash = 55.0;
  double caruncle = 120.0;   // inner-corner tissue level
  double brow_depth = 55.0;
  double brow_thickness = 3.0;
  Vec2 glint_offset;         // glint position relative to the pupil

  // Lid-opening coverage in [0, 1] at pixel centre (x, y).
  double opening_coverage(double x, double y) const;
  // Horizontal extent of the opening from the pupil, used for layout checks.
  double reach() const { return half_width + iris_radius; }
};

struct SynthSample {
  GrayImage image;
  Annotation annotation;
  EyeGeometry right;
  EyeGeometry left;
};

// Deterministic in (config, n); sample i draws from an RNG stream derived
// from (seed, i), so parallel generation matches serial output.
std::vector<SynthSample> synth_generate(const SynthConfig& config, int n);
SynthSample synth_sample(const SynthConfig& config, int index);

// The eye alone on a flat skin patch of the given size, centred on the
// rounded pupil position.
GrayImage render_eye_template(const EyeGeometry& eye, int size, double skin = 160.0);

// Normalized cross-correlation search of `templ` over `image`; returns the
// best position of the template centre.
Vec2 ncc_locate(const GrayImage& image, const GrayImage& templ);

AnnotationSet annotations_of(const std::vector<SynthSample>& samples, int width, int height);

}  // namespace siamedp
