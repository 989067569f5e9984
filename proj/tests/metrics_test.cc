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

#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "siamedp/metrics.h"
#include "siamedp/model.h"
#include "siamedp/parallel.h"

namespace siamedp {
namespace {

EyePair pair(double rx, double ry, double lx, double ly) { return {{rx, ry}, {lx, ly}}; }

TEST(RelativeErrorTest, WorkedExamples) {
  const EyePair truth = pair(40, 50, 90, 50);
  EXPECT_DOUBLE_EQ(relative_eye_error(truth, truth), 0.0);
  EXPECT_DOUBLE_EQ(relative_eye_error(pair(43, 54, 90, 50), truth), 0.1);
  EXPECT_DOUBLE_EQ(relative_eye_error(pair(41, 50, 90, 55), truth), 0.1);
  EXPECT_DOUBLE_EQ(relative_eye_error(pair(90, 50, 40, 50), truth), 1.0);
  EXPECT_THROW(relative_eye_error(truth, pair(10, 10, 10, 10)), Error);
}

TEST(RelativeErrorTest, InvariantToUniformScaling) {
  const EyePair truth = pair(31.5, 42.0, 77.25, 46.5), pred = pair(35.0, 40.0, 74.0, 49.0);
  const double e = relative_eye_error(pred, truth);
  for (double k : {0.5, 2.0, 3.75}) {
    const EyePair t = pair(truth.right.x * k, truth.right.y * k, truth.left.x * k, truth.left.y * k);
    const EyePair p = pair(pred.right.x * k, pred.right.y * k, pred.left.x * k, pred.left.y * k);
    EXPECT_NEAR(relative_eye_error(p, t), e, 1e-12);
  }
}

TEST(AccuracyCurveTest, HandCountedTable) {
  const std::vector<double> errors{0.02, 0.05, 0.07, 0.1, 0.12, 0.3, 0.6, 0.2, 0.26, 0.04};
  const auto curve = accuracy_curve(errors, kRelativeThresholds);
  EXPECT_EQ(curve, (std::vector<double>{0.3, 0.5, 0.6, 0.7, 0.7, 0.9}));
  EXPECT_THROW(accuracy_curve({}, kRelativeThresholds), Error);
  EXPECT_THROW(accuracy_curve(errors, {0.2, 0.1}), Error);
}

TEST(F1Test, EachMissIsOneFalsePositiveAndOneFalseNegative) {
  const std::vector<EyePair> truth{pair(40, 50, 90, 50), pair(30, 40, 80, 40)};
  const std::vector<EyePair> pred{pair(43, 54, 90, 50), pair(30, 52, 80, 40)};
  // distances 5, 0, 12, 0
  EXPECT_EQ(f1_vs_rmse(pred, truth, {5.0, 10.0, 15.0}), (std::vector<double>{0.75, 0.75, 1.0}));
  EXPECT_EQ(f1_vs_rmse(pred, truth, {1.0}), (std::vector<double>{0.5}));
  EXPECT_THROW(f1_vs_rmse(pred, {truth[0]}, {1.0}), Error);
}

TEST(EvaluateTest, ReportCombinesCurvesAndSwaps) {
  const std::vector<EyePair> truth{pair(40, 50, 90, 50), pair(30, 40, 80, 40), pair(20, 30, 70, 30)};
  const std::vector<EyePair> pred{pair(40, 50, 90, 50), pair(30, 52, 80, 40), pair(70, 30, 20, 30)};
  const EvalReport r = evaluate({"a", "b", "c"}, pred, truth);
  ASSERT_EQ(r.images.size(), 3u);
  EXPECT_DOUBLE_EQ(r.images[1].relative_error, 0.24);
  EXPECT_DOUBLE_EQ(r.images[1].right_distance, 12.0);
  EXPECT_TRUE(r.images[2].swapped);
  EXPECT_FALSE(r.images[1].swapped);
  EXPECT_DOUBLE_EQ(r.swap_rate, 1.0 / 3.0);
  EXPECT_NEAR(r.mean_relative_error, (0.0 + 0.24 + 1.0) / 3.0, 1e-12);
  EXPECT_EQ(r.relative_accuracy, (std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3, 2.0 / 3, 2.0 / 3}));
  EXPECT_EQ(r.rmse_accuracy, (std::vector<double>{1.0 / 3, 1.0 / 3, 2.0 / 3, 2.0 / 3}));
  EXPECT_EQ(r.rmse_accuracy_left, (std::vector<double>{2.0 / 3, 2.0 / 3, 2.0 / 3, 2.0 / 3}));
  const auto j = r.to_json();
  EXPECT_EQ(j.at("images"), 3);
  EXPECT_FALSE(j.contains("latency"));
  EXPECT_NE(r.to_table().find("swap"), std::string::npos);
  const std::string csv = r.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_THROW(evaluate({"a"}, pred, truth), Error);
}

TEST(LatencyTest, TimesRequestedRuns) {
  int calls = 0;
  const LatencyStats s = time_runs([&] { ++calls; }, 7, 2);
  EXPECT_EQ(calls, 9);
  EXPECT_EQ(s.runs, 7);
  EXPECT_LE(s.min_ms, s.p50_ms);
  EXPECT_LE(s.p50_ms, s.max_ms);
  EXPECT_THROW(time_runs([] {}, 0, 0), Error);
  const DetectorModel m = make_model(BackboneConfig::uniform(4), 1, GrayImage(24, 24, 80));
  const LatencyStats b = benchmark_latency(m, 64, 48, 2, 1, true);
  EXPECT_EQ(b.width, 64);
  EXPECT_TRUE(b.folded);
  EXPECT_GT(b.mean_ms, 0.0);
  EXPECT_TRUE(latency_to_json(b).contains("mean_ms"));
}

TEST(LatencyTest, ScalesWithPixelCountAndIsStable) {
  set_worker_count(1);
  const DetectorModel m = make_model(BackboneConfig{}, 2, GrayImage(24, 24, 80));
  // Up to three measurements; a clean one passes.
  std::string log;
  bool ok = false;
  for (int attempt = 0; attempt < 3 && !ok; ++attempt) {
    const LatencyStats small = benchmark_latency(m, 96, 96, 100, 10, true);
    const LatencyStats large = benchmark_latency(m, 192, 192, 100, 10, true);
    EXPECT_EQ(small.workers, 1);
    const double ratio = large.p50_ms / small.p50_ms;
    const double small_spread = small.p95_ms / small.p50_ms, large_spread = large.p95_ms / large.p50_ms;
    ok = ratio >= 2.5 && ratio <= 5.0 && small_spread < 1.5 && large_spread < 1.5;
    log += "p50 " + std::to_string(small.p50_ms) + " ms -> " + std::to_string(large.p50_ms) + " ms (ratio " +
           std::to_string(ratio) + "), p95/p50 " + std::to_string(small_spread) + " / " +
           std::to_string(large_spread) + "\n";
  }
  EXPECT_TRUE(ok) << log;
}

}  // namespace
}  // namespace siamedp
