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

#include "siamedp/image.h"

namespace siamedp {

inline constexpr int kReferenceSize = 24;

// Pixel-wise mean of the first `cap` chips followed by a linear stretch that
// maps the 1st and 99th intensity percentiles of the mean to 0 and 255, with
// clamping. A mean whose percentiles coincide yields an all-zero image.
// Throws on an empty list or chips of differing size.
GrayImage build_average_reference(const std::vector<GrayImage>& chips, int cap = 128);

// Nearest-rank percentile of `values` for p in [0, 100].
double percentile(std::vector<double> values, double p);

}  // namespace siamedp
