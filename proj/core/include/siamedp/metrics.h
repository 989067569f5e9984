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

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "siamedp/annotations.h"
#include "siamedp/model.h"

namespace siamedp {

struct EyePair {
  Vec2 right;
  Vec2 left;
};

inline EyePair eye_pair(const DetectionPair& d) { return {d.right.position, d.left.position}; }
inline EyePair eye_pair(const Annotation& a) { return {a.right, a.left}; }

inline const std::vector<double> kRelativeThresholds{0.05, 0.1, 0.15, 0.2, 0.25, 0.5};
inline const std::vector<double> kPixelThresholds{5.0, 10.0, 15.0, 20.0};

double euclidean(Vec2 a, Vec2 b);

// E = max(d_r, d_l) / d, with d the true inter-eye distance. Throws when
// the true eyes coincide.
double relative_eye_error(const EyePair& predicted, const EyePair& truth);

// Fraction of values <= t for each threshold. Throws on empty values or
// unsorted thresholds.
std::vector<double> accuracy_curve(const std::vector<double>& values, const std::vector<double>& thresholds);

// Per side, a detection within the threshold is a true positive and every
// miss counts once as a false positive and once as a false negative, so
// F1 = 2TP / (2TP + FP + FN) over both sides.
std::vector<double> f1_vs_rmse(const std::vector<EyePair>& predicted, const std::vector<EyePair>& truth,
                               const std::vector<double>& thresholds);

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  int runs = 0;
  int workers = 1;
  int width = 0;
  int height = 0;
  bool folded = false;
};

// Times `fn` `runs` times after `warmup` untimed calls.
LatencyStats time_runs(const std::function<void()>& fn, int runs, int warmup);

// Full detect calls on a deterministic synthetic image of the given size.
LatencyStats benchmark_latency(const DetectorModel& model, int width, int height, int runs = 10, int warmup = 3,
                               bool folded = true);

struct ImageResult {
  std::string image;
  EyePair predicted;
  EyePair truth;
  double relative_error = 0.0;
  double right_distance = 0.0;
  double left_distance = 0.0;
  bool swapped = false;  // some prediction lies nearer the opposite true eye
};

struct EvalReport {
  std::vector<ImageResult> images;
  std::vector<double> relative_thresholds = kRelativeThresholds;
  std::vector<double> relative_accuracy;
  std::vector<double> pixel_thresholds = kPixelThresholds;
  std::vector<double> rmse_accuracy;        // both eyes within the threshold
  std::vector<double> rmse_accuracy_right;
  std::vector<double> rmse_accuracy_left;
  std::vector<double> f1;
  double mean_relative_error = 0.0;
  double swap_rate = 0.0;
  std::optional<LatencyStats> latency;

  nlohmann::json to_json() const;
  std::string to_table() const;
  std::string to_csv() const;
};

// Matches predictions to ground truth by position; throws on count mismatch.
EvalReport evaluate(const std::vector<std::string>& names, const std::vector<EyePair>& predicted,
                    const std::vector<EyePair>& truth);

nlohmann::json latency_to_json(const LatencyStats& stats);

}  // namespace siamedp
