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

#include "siamedp/metrics.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "siamedp/backbone.h"
#include "siamedp/error.h"
#include "siamedp/parallel.h"
#include "siamedp/reference.h"
#include "siamedp/synth.h"

namespace siamedp {

double euclidean(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double relative_eye_error(const EyePair& p, const EyePair& t) {
  const double d = euclidean(t.right, t.left);
  if (!(d > 0.0)) throw Error("relative_eye_error: ground-truth eyes coincide");
  return std::max(euclidean(p.right, t.right), euclidean(p.left, t.left)) / d;
}

std::vector<double> accuracy_curve(const std::vector<double>& values, const std::vector<double>& thresholds) {
  if (values.empty()) throw Error("accuracy_curve: no values");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw Error("accuracy_curve: thresholds not sorted");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  for (double t : thresholds) {
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back(static_cast<double>(count) / static_cast<double>(sorted.size()));
  }
  return out;
}

std::vector<double> f1_vs_rmse(const std::vector<EyePair>& predicted, const std::vector<EyePair>& truth,
                               const std::vector<double>& thresholds) {
  if (predicted.size() != truth.size()) throw Error("f1_vs_rmse: prediction and truth counts differ");
  std::vector<double> out;
  for (double t : thresholds) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      for (int s = 0; s < 2; ++s) {
        const Vec2 p = s == 0 ? predicted[i].right : predicted[i].left;
        const Vec2 g = s == 0 ? truth[i].right : truth[i].left;
        if (euclidean(p, g) <= t) {
          tp += 1;
        } else {
          fp += 1;
          fn += 1;
        }
      }
    }
    const double denom = 2 * tp + fp + fn;
    out.push_back(denom > 0 ? 2 * tp / denom : 0.0);
  }
  return out;
}

LatencyStats time_runs(const std::function<void()>& fn, int runs, int warmup) {
  if (runs <= 0) throw Error("benchmark: runs must be positive");
  for (int i = 0; i < warmup; ++i) fn();
  std::vector<double> ms;
  ms.reserve(runs);
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  LatencyStats s;
  s.runs = runs;
  s.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / runs;
  s.p50_ms = percentile(ms, 50.0);
  s.p95_ms = percentile(ms, 95.0);
  s.min_ms = *std::min_element(ms.begin(), ms.end());
  s.max_ms = *std::max_element(ms.begin(), ms.end());
  s.workers = worker_count();
  return s;
}

LatencyStats benchmark_latency(const DetectorModel& model, int width, int height, int runs, int warmup,
                               bool folded) {
  check_input_extent(height, width);
  SynthConfig cfg;
  cfg.width = std::max(width, 128);
  cfg.height = std::max(height, 96);
  GrayImage image = synth_sample(cfg, 0).image;
  if (image.width != width || image.height != height) {
    GrayImage cropped(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) cropped.at(x, y) = image.at(std::min(x, image.width - 1), std::min(y, image.height - 1));
    image = std::move(cropped);
  }
  std::optional<FoldedBackbone> fb;
  if (folded) fb = fold_batchnorm(model.backbone);
  volatile double sink = 0.0;
  LatencyStats s = time_runs(
      [&] {
        const DetectionPair d = detect(model, image, fb ? &*fb : nullptr);
        sink = sink + d.right.position.x;
      },
      runs, warmup);
  s.width = width;
  s.height = height;
  s.folded = folded;
  return s;
}

EvalReport evaluate(const std::vector<std::string>& names, const std::vector<EyePair>& predicted,
                    const std::vector<EyePair>& truth) {
  if (predicted.size() != truth.size() || names.size() != truth.size()) {
    throw Error("evaluate: names, predictions and ground truth differ in count");
  }
  if (truth.empty()) throw Error("evaluate: nothing to evaluate");
  EvalReport r;
  std::vector<double> rel, both, right, left;
  int swaps = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ImageResult ir;
    ir.image = names[i];
    ir.predicted = predicted[i];
    ir.truth = truth[i];
    ir.relative_error = relative_eye_error(predicted[i], truth[i]);
    ir.right_distance = euclidean(predicted[i].right, truth[i].right);
    ir.left_distance = euclidean(predicted[i].left, truth[i].left);
    ir.swapped = euclidean(predicted[i].right, truth[i].left) < ir.right_distance ||
                 euclidean(predicted[i].left, truth[i].right) < ir.left_distance;
    swaps += ir.swapped;
    rel.push_back(ir.relative_error);
    both.push_back(std::max(ir.right_distance, ir.left_distance));
    right.push_back(ir.right_distance);
    left.push_back(ir.left_distance);
    r.images.push_back(std::move(ir));
  }
  r.relative_accuracy = accuracy_curve(rel, r.relative_thresholds);
  r.rmse_accuracy = accuracy_curve(both, r.pixel_thresholds);
  r.rmse_accuracy_right = accuracy_curve(right, r.pixel_thresholds);
  r.rmse_accuracy_left = accuracy_curve(left, r.pixel_thresholds);
  r.f1 = f1_vs_rmse(predicted, truth, r.pixel_thresholds);
  r.mean_relative_error = std::accumulate(rel.begin(), rel.end(), 0.0) / static_cast<double>(rel.size());
  r.swap_rate = static_cast<double>(swaps) / static_cast<double>(truth.size());
  return r;
}

nlohmann::json latency_to_json(const LatencyStats& s) {
  return {{"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms}, {"p95_ms", s.p95_ms}, {"min_ms", s.min_ms},
          {"max_ms", s.max_ms},   {"runs", s.runs},     {"workers", s.workers}, {"width", s.width},
          {"height", s.height},   {"folded", s.folded}};
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j = {{"images", images.size()},
                      {"mean_relative_error", mean_relative_error},
                      {"swap_rate", swap_rate},
                      {"relative_thresholds", relative_thresholds},
                      {"relative_accuracy", relative_accuracy},
                      {"pixel_thresholds", pixel_thresholds},
                      {"rmse_accuracy", rmse_accuracy},
                      {"rmse_accuracy_right", rmse_accuracy_right},
                      {"rmse_accuracy_left", rmse_accuracy_left},
                      {"f1", f1}};
  std::vector<double> errors;
  for (const auto& ir : images) errors.push_back(ir.relative_error);
  j["relative_errors"] = errors;
  if (latency) j["latency"] = latency_to_json(*latency);
  return j;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char buf[128];
  auto row = [&](const char* label, const std::vector<double>& ts, const std::vector<double>& vs, const char* fmt) {
    out << label << '\n';
    for (std::size_t i = 0; i < ts.size(); ++i) {
      std::snprintf(buf, sizeof(buf), fmt, ts[i], vs[i]);
      out << buf;
    }
  };
  std::snprintf(buf, sizeof(buf), "images %zu  mean E %.4f  swap rate %.4f\n", images.size(), mean_relative_error,
                swap_rate);
  out << buf;
  row("relative error accuracy", relative_thresholds, relative_accuracy, "  e <= %-5.2f  %8.4f\n");
  row("pixel accuracy (both eyes)", pixel_thresholds, rmse_accuracy, "  <= %4.0f px  %8.4f\n");
  row("pixel accuracy (right eye)", pixel_thresholds, rmse_accuracy_right, "  <= %4.0f px  %8.4f\n");
  row("pixel accuracy (left eye)", pixel_thresholds, rmse_accuracy_left, "  <= %4.0f px  %8.4f\n");
  row("F1 per RMSE", pixel_thresholds, f1, "  <= %4.0f px  %8.4f\n");
  if (latency) {
    std::snprintf(buf, sizeof(buf), "latency %dx%d  mean %.3f ms  p50 %.3f ms  p95 %.3f ms  workers %d\n",
                  latency->width, latency->height, latency->mean_ms, latency->p50_ms, latency->p95_ms,
                  latency->workers);
    out << buf;
  }
  return out.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "image,pred_rx,pred_ry,pred_lx,pred_ly,rx,ry,lx,ly,right_distance,left_distance,relative_error,swapped\n";
  for (const auto& ir : images) {
    out << ir.image << ',' << ir.predicted.right.x << ',' << ir.predicted.right.y << ',' << ir.predicted.left.x << ','
        << ir.predicted.left.y << ',' << ir.truth.right.x << ',' << ir.truth.right.y << ',' << ir.truth.left.x << ','
        << ir.truth.left.y << ',' << ir.right_distance << ',' << ir.left_distance << ',' << ir.relative_error << ','
        << (ir.swapped ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace siamedp
