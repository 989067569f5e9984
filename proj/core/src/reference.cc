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

#include "siamedp/reference.h"

#include <algorithm>
#include <cmath>

#include "siamedp/error.h"

namespace siamedp {

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("percentile: empty input");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size()));
  const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return values[std::min(idx, values.size() - 1)];
}

GrayImage build_average_reference(const std::vector<GrayImage>& chips, int cap) {
  if (chips.empty()) throw Error("build_average_reference: no chips");
  if (cap <= 0) throw Error("build_average_reference: cap must be positive");
  const int w = chips.front().width;
  const int h = chips.front().height;
  const std::size_t count = std::min<std::size_t>(chips.size(), static_cast<std::size_t>(cap));

  std::vector<double> mean(static_cast<std::size_t>(w) * h, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    const GrayImage& chip = chips[k];
    if (chip.width != w || chip.height != h) throw ShapeError("build_average_reference: chips differ in size");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += chip.pixels[i];
  }
  for (double& v : mean) v /= static_cast<double>(count);

  const double lo = percentile(mean, 1.0);
  const double hi = percentile(mean, 99.0);
  GrayImage out(w, h);
  if (!(hi > lo)) return out;
  const double scale = 255.0 / (hi - lo);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double v = std::clamp((mean[i] - lo) * scale, 0.0, 255.0);
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(v));
  }
  return out;
}

}  // namespace siamedp
