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
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace siamedp {

// p <- p - lr * (g + weight_decay * p), elementwise.
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, T lr, T weight_decay);

// A parameter buffer paired with its analytic gradient.
struct GradCheckTarget {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckOptions {
  double step = 1e-5;
  int samples_per_target = 0;  // <= 0 checks every element
  std::uint64_t seed = 0;
  double floor = 1e-9;  // denominator floor; gradients below it are compared absolutely
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_target;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Central differences on sampled elements. The relative error of one
// element is |a - fd| / max(|a|, |fd|, 1e-12). Parameters are restored
// after each probe. Throws if nothing is sampled or the loss is not finite.
GradCheckResult grad_check(const std::function<double()>& loss_fn, std::span<const GradCheckTarget> targets,
                           const GradCheckOptions& options = {});

}  // namespace siamedp
