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

#include <array>
#include <random>

#include "siamedp/layers.h"
#include "siamedp/parallel.h"
#include "test_util.h"

namespace siamedp {
namespace {

using testing::dot;
using testing::max_abs_diff;
using testing::naive_conv;
using testing::random_tensor;

TEST(ConvTest, OutputExtentIsCeilOfInputOverStride) {
  for (int in = 1; in <= 40; ++in) {
    EXPECT_EQ(conv_output_extent(in, 3, 2), (in + 1) / 2) << in;
    EXPECT_EQ(conv_output_extent(in, 1, 2), (in + 1) / 2) << in;
    EXPECT_EQ(conv_output_extent(in, 3, 1), in) << in;
  }
}

TEST(ConvTest, MatchesNaiveLoopOracle) {
  std::mt19937_64 rng(11);
  struct Case {
    int n, ci, co, h, w, k, stride;
  };
  for (const Case c : {Case{2, 3, 4, 7, 9, 3, 1}, Case{1, 2, 5, 8, 5, 3, 2}, Case{3, 4, 2, 6, 6, 1, 1},
                       Case{2, 3, 3, 9, 7, 1, 2}, Case{1, 1, 8, 13, 11, 3, 2}}) {
    ConvParams<double> p;
    p.weight = random_tensor<double>(Shape{c.co, c.ci, c.k, c.k}, rng);
    p.stride = c.stride;
    const TensorD x = random_tensor<double>(Shape{c.n, c.ci, c.h, c.w}, rng);
    EXPECT_LT(max_abs_diff(conv2d_forward(x, p), naive_conv(x, p.weight, p.bias, c.stride)), 1e-12);

    ConvParams<float> pf{p.weight.cast<float>(), {}, c.stride};
    const Tensor xf = x.cast<float>();
    EXPECT_LT(max_abs_diff(conv2d_forward(xf, pf), naive_conv(xf, pf.weight, pf.bias, c.stride)), 1e-5);
  }
}

TEST(ConvTest, BiasIsAddedPerChannel) {
  std::mt19937_64 rng(5);
  ConvParams<double> p;
  p.weight = random_tensor<double>(Shape{3, 2, 3, 3}, rng);
  p.bias = {0.5, -1.0, 2.0};
  const TensorD x = random_tensor<double>(Shape{1, 2, 5, 4}, rng);
  EXPECT_LT(max_abs_diff(conv2d_forward(x, p), naive_conv(x, p.weight, p.bias, 1)), 1e-12);
}

TEST(ConvTest, WorkerCountDoesNotChangeOutput) {
  std::mt19937_64 rng(3);
  ConvParams<float> p{random_tensor<float>(Shape{6, 3, 3, 3}, rng), {}, 2};
  const Tensor x = random_tensor<float>(Shape{5, 3, 17, 12}, rng);
  set_worker_count(1);
  const Tensor a = conv2d_forward(x, p);
  set_worker_count(3);
  const Tensor b = conv2d_forward(x, p);
  set_worker_count(0);
  EXPECT_EQ(a, b);
}

TEST(ConvTest, BackwardRejectsEmptyCacheAndWrongShape) {
  std::mt19937_64 rng(1);
  ConvParams<double> p{random_tensor<double>(Shape{2, 1, 3, 3}, rng), {}, 1};
  ConvCache<double> empty;
  EXPECT_THROW(conv2d_backward(TensorD::nchw(1, 2, 4, 4), empty, p), Error);
  ConvCache<double> cache;
  conv2d_forward(random_tensor<double>(Shape{1, 1, 4, 4}, rng), p, &cache);
  EXPECT_THROW(conv2d_backward(TensorD::nchw(1, 2, 3, 4), cache, p), Error);
}

TEST(ConvGradientTest, FiniteDifferences) {
  std::mt19937_64 rng(21);
  for (int stride : {1, 2}) {
    for (int k : {1, 3}) {
      ConvParams<double> p{random_tensor<double>(Shape{3, 2, k, k}, rng), {}, stride};
      TensorD x = random_tensor<double>(Shape{2, 2, 5, 6}, rng);
      ConvCache<double> cache;
      const TensorD y = conv2d_forward(x, p, &cache);
      const TensorD r = random_tensor<double>(y.shape(), rng);
      const ConvGrads<double> g = conv2d_backward(r, cache, p);
      auto loss = [&] { return dot(conv2d_forward(x, p), r); };
      const std::array targets{testing::target("input", x, g.input), testing::target("weight", p.weight, g.weight)};
      const GradCheckResult res = grad_check(loss, targets);
      EXPECT_LT(res.max_relative_error, 1e-4) << "k=" << k << " stride=" << stride << " worst " << res.worst_target;
    }
  }
}

TEST(BatchNormTest, TrainModeMatchesNaiveStatistics) {
  std::mt19937_64 rng(4);
  auto p = BatchNormParams<double>::identity(3);
  p.gamma = random_tensor<double>(Shape{3}, rng, 0.5, 1.5);
  p.beta = random_tensor<double>(Shape{3}, rng);
  const TensorD a = random_tensor<double>(Shape{2, 3, 4, 5}, rng);
  const TensorD b = random_tensor<double>(Shape{1, 3, 2, 2}, rng);
  const std::array groups{a, b};
  const auto out = batchnorm_forward<double>(groups, p, Mode::kTrain);
  for (int c = 0; c < 3; ++c) {
    double sum = 0, sq = 0, n = 0;
    for (const auto* t : {&a, &b})
      for (int s = 0; s < t->n(); ++s)
        for (int y = 0; y < t->h(); ++y)
          for (int x = 0; x < t->w(); ++x) {
            const double v = t->at(s, c, y, x);
            sum += v;
            sq += v * v;
            n += 1;
          }
    const double mean = sum / n, var = sq / n - mean * mean;
    const double inv = 1.0 / std::sqrt(var + p.epsilon);
    for (int g = 0; g < 2; ++g) {
      const TensorD& in = g == 0 ? a : b;
      for (int s = 0; s < in.n(); ++s)
        for (int y = 0; y < in.h(); ++y)
          for (int x = 0; x < in.w(); ++x) {
            const double expect = p.gamma[c] * (in.at(s, c, y, x) - mean) * inv + p.beta[c];
            EXPECT_NEAR(out[g].at(s, c, y, x), expect, 1e-12);
          }
    }
  }
}

TEST(BatchNormTest, RunningStatsUseUnbiasedVarianceAndMomentum) {
  auto p = BatchNormParams<double>::identity(1);
  const TensorD x(Shape{1, 1, 1, 4}, std::vector<double>{1, 2, 3, 4});
  BatchNormCache<double> cache;
  batchnorm_forward(x, p, Mode::kTrain, &cache);
  update_running_stats(p, cache);
  EXPECT_NEAR(p.running_mean[0], 0.1 * 2.5, 1e-12);
  EXPECT_NEAR(p.running_var[0], 0.9 * 1.0 + 0.1 * (5.0 / 3.0), 1e-12);
}

TEST(BatchNormTest, EvalModeUsesRunningStatsAndRejectsBadVariance) {
  auto p = BatchNormParams<double>::identity(2);
  p.running_mean[0] = 1.0;
  p.running_var[0] = 4.0;
  p.gamma[1] = 2.0;
  p.beta[1] = -1.0;
  const TensorD x(Shape{1, 2, 1, 1}, std::vector<double>{3.0, 0.5});
  const TensorD y = batchnorm_forward(x, p, Mode::kEval);
  EXPECT_NEAR(y[0], 2.0 / std::sqrt(4.0 + 1e-5), 1e-12);
  EXPECT_NEAR(y[1], 2.0 * 0.5 / std::sqrt(1.0 + 1e-5) - 1.0, 1e-12);
  p.running_var[1] = 0.0;
  EXPECT_THROW(batchnorm_forward(x, p, Mode::kEval), Error);
}

TEST(BatchNormGradientTest, TrainModeAcrossGroups) {
  std::mt19937_64 rng(8);
  auto p = BatchNormParams<double>::identity(3);
  p.gamma = random_tensor<double>(Shape{3}, rng, 0.5, 1.5);
  p.beta = random_tensor<double>(Shape{3}, rng);
  std::array<TensorD, 2> x{random_tensor<double>(Shape{2, 3, 3, 4}, rng), random_tensor<double>(Shape{2, 3, 2, 2}, rng)};
  BatchNormCache<double> cache;
  const auto y = batchnorm_forward<double>(x, p, Mode::kTrain, &cache);
  const std::array<TensorD, 2> r{random_tensor<double>(y[0].shape(), rng), random_tensor<double>(y[1].shape(), rng)};
  const BatchNormGrads<double> g = batchnorm_backward<double>(r, cache, p);
  auto loss = [&] {
    const auto out = batchnorm_forward<double>(x, p, Mode::kTrain);
    return dot(out[0], r[0]) + dot(out[1], r[1]);
  };
  const std::array targets{testing::target("x0", x[0], g.input[0]), testing::target("x1", x[1], g.input[1]),
                           testing::target("gamma", p.gamma, g.gamma), testing::target("beta", p.beta, g.beta)};
  const GradCheckResult res = grad_check(loss, targets);
  EXPECT_LT(res.max_relative_error, 1e-4) << res.worst_target << "[" << res.worst_index << "]";
}

TEST(BatchNormGradientTest, EvalMode) {
  std::mt19937_64 rng(9);
  auto p = BatchNormParams<double>::identity(2);
  p.gamma = random_tensor<double>(Shape{2}, rng, 0.5, 1.5);
  p.running_mean = random_tensor<double>(Shape{2}, rng);
  p.running_var = random_tensor<double>(Shape{2}, rng, 0.5, 2.0);
  TensorD x = random_tensor<double>(Shape{2, 2, 3, 3}, rng);
  BatchNormCache<double> cache;
  const TensorD y = batchnorm_forward(x, p, Mode::kEval, &cache);
  const TensorD r = random_tensor<double>(y.shape(), rng);
  const BatchNormGrads<double> g = batchnorm_backward(r, cache, p);
  auto loss = [&] { return dot(batchnorm_forward(x, p, Mode::kEval), r); };
  const std::array targets{testing::target("x", x, g.input[0]), testing::target("gamma", p.gamma, g.gamma),
                           testing::target("beta", p.beta, g.beta)};
  EXPECT_LT(grad_check(loss, targets).max_relative_error, 1e-4);
}

TEST(ReluTest, ForwardAndGradient) {
  std::mt19937_64 rng(12);
  TensorD x = random_tensor<double>(Shape{2, 3, 4, 4}, rng);
  for (auto& v : x.vec()) {
    if (std::abs(v) < 1e-3) v = 0.5;
  }
  const TensorD y = relu_forward(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i] > 0 ? x[i] : 0.0);
  const TensorD r = random_tensor<double>(x.shape(), rng);
  const TensorD g = relu_backward(r, x);
  EXPECT_EQ(g, relu_backward(r, y));
  auto loss = [&] { return dot(relu_forward(x), r); };
  const std::array targets{testing::target("x", x, g)};
  EXPECT_LT(grad_check(loss, targets).max_relative_error, 1e-4);
}

TEST(ResidualTest, ForwardAndGradient) {
  std::mt19937_64 rng(13);
  TensorD a = random_tensor<double>(Shape{1, 2, 3, 3}, rng);
  TensorD b = random_tensor<double>(Shape{1, 2, 3, 3}, rng);
  const TensorD y = residual_add_forward(a, b);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], a[i] + b[i]);
  EXPECT_THROW(residual_add_forward(a, TensorD::nchw(1, 2, 3, 2)), ShapeError);
  const TensorD r = random_tensor<double>(y.shape(), rng);
  const auto [ga, gb] = residual_add_backward(r);
  auto loss = [&] { return dot(residual_add_forward(a, b), r); };
  const std::array targets{testing::target("a", a, ga), testing::target("b", b, gb)};
  EXPECT_LT(grad_check(loss, targets).max_relative_error, 1e-4);
}

TEST(SgdTest, AppliesWeightDecay) {
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.5, 0.0};
  sgd_step<double>(p, g, 0.1, 0.01);
  EXPECT_DOUBLE_EQ(p[0], 1.0 - 0.1 * (0.5 + 0.01 * 1.0));
  EXPECT_DOUBLE_EQ(p[1], -2.0 - 0.1 * (0.01 * -2.0));
}

TEST(GradCheckTest, DetectsWrongGradient) {
  TensorD x(Shape{3}, std::vector<double>{1.0, 2.0, 3.0});
  TensorD wrong(Shape{3}, std::vector<double>{2.0, 4.0, 7.0});
  auto loss = [&] { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; };
  const std::array targets{testing::target("x", x, wrong)};
  const GradCheckResult res = grad_check(loss, targets);
  EXPECT_NEAR(res.max_relative_error, 1.0 / 7.0, 1e-6);
  EXPECT_EQ(res.worst_index, 2u);
  EXPECT_EQ(x[2], 3.0);
}

}  // namespace
}  // namespace siamedp
