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

#include "siamedp/optim.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "siamedp/error.h"

namespace siamedp {

template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, T lr, T weight_decay) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: parameter and gradient sizes differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= lr * (grads[i] + weight_decay * params[i]);
  }
}

template void sgd_step(std::span<float>, std::span<const float>, float, float);
template void sgd_step(std::span<double>, std::span<const double>, double, double);

GradCheckResult grad_check(const std::function<double()>& loss_fn, std::span<const GradCheckTarget> targets,
                           const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  const double h = options.step;

  auto evaluate = [&]() {
    double v = loss_fn();
    if (!std::isfinite(v)) throw Error("grad_check: loss is not finite");
    return v;
  };
  evaluate();

  for (const auto& target : targets) {
    if (target.values.size() != target.analytic.size()) {
      throw ShapeError("grad_check: analytic gradient size mismatch for " + target.name);
    }
    std::vector<std::size_t> indices(target.values.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (options.samples_per_target > 0 && indices.size() > static_cast<std::size_t>(options.samples_per_target)) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(options.samples_per_target);
      std::sort(indices.begin(), indices.end());
    }
    for (std::size_t idx : indices) {
      double& p = target.values[idx];
      const double saved = p;
      p = saved + h;
      const double up = evaluate();
      p = saved - h;
      const double down = evaluate();
      p = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = target.analytic[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error || result.checked == 1) {
        result.max_relative_error = std::max(rel, result.max_relative_error);
        if (rel >= result.max_relative_error) {
          result.worst_target = target.name;
          result.worst_index = idx;
          result.worst_analytic = analytic;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  if (result.checked == 0) throw Error("grad_check: no parameters to check");
  return result;
}

}  // namespace siamedp
