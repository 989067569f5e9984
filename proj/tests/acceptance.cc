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

// Acceptance suite: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Usage: siamedp_acceptance [--work DIR] [criterion ...]

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "siamedp/backbone.h"
#include "siamedp/config.h"
#include "siamedp/losses.h"
#include "siamedp/metrics.h"
#include "siamedp/model.h"
#include "siamedp/parallel.h"
#include "siamedp/serialize.h"
#include "siamedp/synth.h"
#include "siamedp/train.h"
#include "test_util.h"

namespace fs = std::filesystem;
using namespace siamedp;
using testing::dot;
using testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_work = fs::temp_directory_path() / "siamedp_acceptance";

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TrainData make_corpus(std::uint64_t seed, int n) {
  SynthConfig cfg;
  cfg.seed = seed;
  TrainData data;
  for (auto& s : synth_generate(cfg, n)) {
    data.images.push_back(std::move(s.image));
    data.annotations.push_back(s.annotation);
  }
  return data;
}

TrainData slice(const TrainData& d, std::size_t begin, std::size_t end) {
  TrainData out;
  out.images.assign(d.images.begin() + begin, d.images.begin() + end);
  out.annotations.assign(d.annotations.begin() + begin, d.annotations.begin() + end);
  return out;
}

EvalReport evaluate_model(const DetectorModel& model, const TrainData& data, bool folded = true) {
  const FoldedBackbone f = fold_batchnorm(model.backbone);
  std::vector<std::string> names;
  std::vector<EyePair> pred, truth;
  for (std::size_t i = 0; i < data.size(); ++i) {
    names.push_back(data.annotations[i].image);
    pred.push_back(eye_pair(detect(model, data.images[i], folded ? &f : nullptr)));
    truth.push_back(eye_pair(data.annotations[i]));
  }
  return evaluate(names, pred, truth);
}

Checkpoint train_logged(const TrainConfig& cfg, const TrainData& data, const char* label) {
  TrainOptions opts;
  opts.run_config = train_config_to_flat(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  opts.on_step = [&](std::int64_t it, const StepResult& r) {
    if ((it + 1) % 100 == 0 || it + 1 == cfg.iterations) {
      std::fprintf(stderr, "[%s] iter %lld/%d loss %.4f (%.0f s)\n", label, static_cast<long long>(it + 1),
                   cfg.iterations, r.loss, seconds_since(t0));
    }
  };
  return train(cfg, data, opts);
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  std::mt19937_64 rng(1001);
  std::map<std::string, double> worst;
  auto record = [&](const std::string& op, const GradCheckResult& r) {
    worst[op] = std::max(worst[op], r.max_relative_error);
  };

  for (int stride : {1, 2}) {
    for (int k : {1, 3}) {
      ConvParams<double> p{random_tensor<double>(Shape{3, 2, k, k}, rng), {}, stride};
      TensorD x = random_tensor<double>(Shape{2, 2, 5, 6}, rng);
      ConvCache<double> cache;
      const TensorD r = random_tensor<double>(conv2d_forward(x, p, &cache).shape(), rng);
      const ConvGrads<double> g = conv2d_backward(r, cache, p);
      const std::array t{testing::target("x", x, g.input), testing::target("w", p.weight, g.weight)};
      record("conv", grad_check([&] { return dot(conv2d_forward(x, p), r); }, t));
    }
  }
  {
    auto p = BatchNormParams<double>::identity(3);
    p.gamma = random_tensor<double>(Shape{3}, rng, 0.5, 1.5);
    p.beta = random_tensor<double>(Shape{3}, rng);
    std::array<TensorD, 2> x{random_tensor<double>(Shape{2, 3, 3, 4}, rng),
                             random_tensor<double>(Shape{2, 3, 2, 2}, rng)};
    BatchNormCache<double> cache;
    const auto y = batchnorm_forward<double>(x, p, Mode::kTrain, &cache);
    const std::array<TensorD, 2> r{random_tensor<double>(y[0].shape(), rng), random_tensor<double>(y[1].shape(), rng)};
    const BatchNormGrads<double> g = batchnorm_backward<double>(r, cache, p);
    auto loss = [&] {
      const auto out = batchnorm_forward<double>(x, p, Mode::kTrain);
      return dot(out[0], r[0]) + dot(out[1], r[1]);
    };
    const std::array t{testing::target("x0", x[0], g.input[0]), testing::target("x1", x[1], g.input[1]),
                       testing::target("gamma", p.gamma, g.gamma), testing::target("beta", p.beta, g.beta)};
    record("batchnorm", grad_check(loss, t));
  }
  {
    TensorD x = random_tensor<double>(Shape{2, 3, 4, 4}, rng);
    for (auto& v : x.vec()) {
      if (std::abs(v) < 1e-3) v = 0.5;
    }
    const TensorD r = random_tensor<double>(x.shape(), rng);
    const TensorD g = relu_backward(r, x);
    const std::array t{testing::target("x", x, g)};
    record("relu", grad_check([&] { return dot(relu_forward(x), r); }, t));
  }
  {
    TensorD a = random_tensor<double>(Shape{1, 2, 3, 3}, rng), b = random_tensor<double>(Shape{1, 2, 3, 3}, rng);
    const TensorD r = random_tensor<double>(a.shape(), rng);
    const auto [ga, gb] = residual_add_backward(r);
    const std::array t{testing::target("a", a, ga), testing::target("b", b, gb)};
    record("residual", grad_check([&] { return dot(residual_add_forward(a, b), r); }, t));
  }
  {
    TensorD s = random_tensor<double>(Shape{2, 3, 4, 5}, rng), ref = random_tensor<double>(Shape{1, 3, 3, 3}, rng);
    std::vector<double> gq(20);
    for (auto& v : gq) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const SimilarityGrads<double> g = similarity_map_backward(gq, s, ref, 1);
    TensorD gs(s.shape());
    std::copy(g.search.vec().begin(), g.search.vec().end(), gs.sample(1));
    auto loss = [&] {
      const auto q = similarity_map(s, ref, 1);
      double l = 0;
      for (std::size_t i = 0; i < gq.size(); ++i) l += gq[i] * q.values[i];
      return l;
    };
    const std::array t{testing::target("search", s, gs), testing::target("ref", ref, g.ref)};
    record("similarity", grad_check(loss, t));
  }
  {
    // Regression head and L1 position loss: L = |alpha (cell + W f) - gt| / alpha.
    const double alpha = 8.0;
    TensorD w = random_tensor<double>(Shape{2, 6}, rng);
    TensorD f = random_tensor<double>(Shape{6}, rng);
    const Cell cell{4, 3};
    const Vec2 gt{37.3, 21.9};
    auto position = [&] { return compose_position(cell, regress_offset(RegressionHead<double>{w}, f.vec()), alpha); };
    const Vec2 gp = regression_loss_grad(position(), gt, 1, alpha);
    TensorD gw(w.shape()), gf(f.shape());
    for (int c = 0; c < 6; ++c) {
      gw[c] = alpha * gp.x * f[c];
      gw[6 + c] = alpha * gp.y * f[c];
      gf[c] = alpha * (gp.x * w[c] + gp.y * w[6 + c]);
    }
    const std::array t{testing::target("W", w, gw), testing::target("f", f, gf)};
    record("regression", grad_check([&] { return regression_loss(position(), gt, 1, alpha); }, t));
  }
  for (const CosFaceForm form : {CosFaceForm::kOppositeClass, CosFaceForm::kSharedDenominator}) {
    for (double s : {1.0, 2.0, 30.0}) {
      HeatMap<double> q{4, 5, 8.0, std::vector<double>(20)};
      for (auto& v : q.values) v = std::uniform_real_distribution<double>(-1, 1)(rng);
      const GroundTruthHeatMap y = gt_heatmap(Vec2{16.0, 8.0}, 8.0, 4, 5);
      const CosFaceParams p{s, s == 1.0 ? 0.0 : 0.1, form};
      TensorD values(Shape{20}, q.values);
      const TensorD analytic(Shape{20}, cosface_bce_backward(q, y, p));
      auto loss = [&] {
        q.values = values.vec();
        return cosface_bce(q, y, p);
      };
      const std::array t{testing::target("q", values, analytic)};
      record("cosface", grad_check(loss, t, {1e-6, 0, 0, 1e-5}));
    }
  }

  double full = 0.0;
  {
    auto backbone = Backbone<double>::build(BackboneConfig::uniform(8), 1002);
    RegressionHead<double> head{random_tensor<double>(Shape{2, 8}, rng, -0.5, 0.5)};
    std::vector<GrayImage> images(2, GrayImage(40, 40));
    for (auto& img : images)
      for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() % 256);
    GrayImage ref(24, 24);
    for (auto& p : ref.pixels) p = static_cast<std::uint8_t>(rng() % 256);
    const TensorD search = to_batch({&images[0], &images[1]}).cast<double>();
    const TensorD pair = reference_pair<double>(ref);
    const std::vector<Annotation> truth{{"a", {9.5, 14.0}, {30.0, 17.25}}, {"b", {4.0, 33.0}, {26.5, 21.0}}};
    Objective objective;
    objective.cosface.scale = 2.0;
    ModelGrads<double> grads{backbone.zero_grads(), TensorD(head.weight.shape())};
    forward_backward(backbone, head, search, pair, truth, objective, &grads);
    std::vector<GradCheckTarget> targets;
    std::vector<TensorD*> values;
    backbone.for_each_parameter([&](const std::string&, TensorD& t) { values.push_back(&t); });
    std::size_t i = 0;
    grads.backbone.for_each(
        [&](const std::string& name, TensorD& g) { targets.push_back({name, values[i++]->span(), g.span()}); });
    targets.push_back(testing::target("head", head.weight, grads.head));
    ModelGrads<double>* none = nullptr;
    auto loss = [&] { return forward_backward(backbone, head, search, pair, truth, objective, none).loss; };
    full = grad_check(loss, targets, {1e-6, 4, 1003}).max_relative_error;
  }

  bool ok = full < 1e-3;
  std::string detail;
  for (const auto& [op, err] : worst) {
    ok = ok && err < 1e-4;
    detail += fmt("%s %.1e, ", op.c_str(), err);
  }
  detail += fmt("full model %.1e", full);
  return {ok, detail};
}

// Patch-loop cosine with clamped indices, accumulated in long double.
std::vector<double> naive_similarity(const Tensor& s, const Tensor& r) {
  const int c = s.c(), rows = s.h(), cols = s.w(), m = r.h(), n = r.w();
  std::vector<double> out;
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      long double num = 0, ns = 0, nr = 0;
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const long double a = s.at(0, ch, std::clamp(y + i - m / 2, 0, rows - 1), std::clamp(x + j - n / 2, 0, cols - 1));
            const long double b = r.at(0, ch, i, j);
            num += a * b;
            ns += a * a;
            nr += b * b;
          }
      out.push_back(ns == 0 || nr == 0 ? 0.0 : static_cast<double>(num / std::sqrt(ns * nr)));
    }
  }
  return out;
}

Outcome similarity_oracle() {
  std::mt19937_64 rng(2001);
  std::uniform_int_distribution<int> extent(3, 16), channels(1, 32);
  double worst = 0.0;
  bool in_range = true;
  int border_cells = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int c = channels(rng);
    const Tensor s = random_tensor<float>(Shape{1, c, extent(rng), extent(rng)}, rng, -2.0, 2.0);
    const Tensor r = random_tensor<float>(Shape{1, c, 3, 3}, rng, -2.0, 2.0);
    const HeatMap<float> q = similarity_map(s, r);
    const auto oracle = naive_similarity(s, r);
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      worst = std::max(worst, std::abs(static_cast<double>(q.values[i]) - oracle[i]));
      in_range = in_range && q.values[i] >= -1.0f && q.values[i] <= 1.0f;
      const int y = static_cast<int>(i) / q.cols, x = static_cast<int>(i) % q.cols;
      border_cells += y == 0 || x == 0 || y == q.rows - 1 || x == q.cols - 1;
    }
  }
  return {worst < 1e-6 && in_range,
          fmt("50 pairs, max |diff| %.2e, %d border cells, values in [-1,1]: %s", worst, border_cells,
              in_range ? "yes" : "no")};
}

// Unstabilized literal evaluation of both forms.
double brute_cosface(const HeatMap<double>& q, const GroundTruthHeatMap& y, CosFaceForm form) {
  const std::size_t n = q.values.size();
  double total = 0.0;
  if (form == CosFaceForm::kSharedDenominator) {
    for (std::size_t u = 0; u < n; ++u) {
      double denom = 0.0;
      for (std::size_t t = 0; t < n; ++t) denom += std::exp(q.values[t]);
      total += std::log(std::exp(q.values[u]) / denom);
    }
  } else {
    double pos = 0.0, neg = 0.0;
    for (std::size_t t = 0; t < n; ++t) (y.labels[t] ? pos : neg) += std::exp(q.values[t]);
    for (std::size_t u = 0; u < n; ++u) {
      const double e = std::exp(q.values[u]);
      total += y.labels[u] ? std::log(e / (e + neg)) : std::log(pos / (e + pos));
    }
  }
  return -total / static_cast<double>(n);
}

Outcome loss_oracle() {
  std::mt19937_64 rng(3001);
  std::uniform_int_distribution<int> extent(2, 12);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = extent(rng), cols = extent(rng);
    HeatMap<double> q{rows, cols, 8.0, std::vector<double>(static_cast<std::size_t>(rows) * cols)};
    for (auto& v : q.values) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const Vec2 gt{8.0 * std::uniform_int_distribution<int>(0, cols - 1)(rng),
                  8.0 * std::uniform_int_distribution<int>(0, rows - 1)(rng)};
    const GroundTruthHeatMap y = gt_heatmap(gt, 8.0, rows, cols);
    for (const CosFaceForm form : {CosFaceForm::kOppositeClass, CosFaceForm::kSharedDenominator}) {
      worst = std::max(worst, std::abs(cosface_bce(q, y, CosFaceParams{1.0, 0.0, form}) - brute_cosface(q, y, form)));
    }
  }

  const HeatMap<double> two{1, 2, 8.0, {0.3, 0.3}};
  const GroundTruthHeatMap y2{1, 2, Cell{0, 0}, {1, 0}};
  double two_err = 0.0;
  for (const CosFaceForm form : {CosFaceForm::kOppositeClass, CosFaceForm::kSharedDenominator}) {
    two_err = std::max(two_err, std::abs(cosface_bce(two, y2, CosFaceParams{1.0, 0.0, form}) - std::log(2.0)));
  }

  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    HeatMap<double> q{6, 8, 8.0, std::vector<double>(48)};
    for (auto& v : q.values) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const GroundTruthHeatMap y = gt_heatmap(Vec2{8.0 * (trial % 8), 8.0 * (trial % 6)}, 8.0, 6, 8);
    const double s = trial % 2 ? 30.0 : 4.0;
    for (const CosFaceForm form : {CosFaceForm::kOppositeClass, CosFaceForm::kSharedDenominator}) {
      double prev = -1.0;
      for (double m = 0.0; m < 0.95; m += 0.05) {
        const double l = cosface_bce(q, y, CosFaceParams{s, m, form});
        violations += l < prev;
        prev = l;
      }
    }
  }
  return {worst < 1e-6 && two_err < 1e-6 && violations == 0,
          fmt("50 maps max |diff| %.2e, 1x2 case |L - log 2| %.2e, margin monotonicity violations %d/100 cases",
              worst, two_err, violations)};
}

Outcome geometry() {
  std::mt19937_64 rng(4001);
  int compose_mismatch = 0;
  for (int i = 0; i < 1000; ++i) {
    const Cell cell{static_cast<int>(rng() % 16), static_cast<int>(rng() % 12)};
    const Vec2 dx{std::uniform_real_distribution<double>(-1, 1)(rng), std::uniform_real_distribution<double>(-1, 1)(rng)};
    const Vec2 p = compose_position(cell, dx, 8.0);
    compose_mismatch += p.x != 8.0 * (cell.col + dx.x) || p.y != 8.0 * (cell.row + dx.y);
  }
  const BackboneConfig cfg;
  const auto backbone = Backbone<float>::build(cfg, 4002);
  const DetectorModel model = make_model(cfg, 4002, GrayImage(24, 24, 128));
  std::uniform_int_distribution<int> extent(BackboneConfig::kMinInputExtent, 160);
  int shape_mismatch = 0;
  for (int i = 0; i < 20; ++i) {
    const int h = extent(rng), w = extent(rng);
    const Tensor f = extract_features(backbone, Tensor::nchw(1, 1, h, w), Mode::kEval);
    shape_mismatch += f.h() != (h + 7) / 8 || f.w() != (w + 7) / 8;
  }
  const bool ok = compose_mismatch == 0 && shape_mismatch == 0 && cfg.total_stride() == 8 && model.alpha == 8.0f;
  return {ok, fmt("alpha %d, compose mismatches %d/1000, ceil(in/8) mismatches %d/20", cfg.total_stride(),
                  compose_mismatch, shape_mismatch)};
}

Outcome overfit() {
  set_worker_count(1);
  const TrainData data = make_corpus(5001, 64);
  TrainConfig cfg = train_config_from(RunConfig{});
  cfg.iterations = 500;
  const auto t0 = std::chrono::steady_clock::now();
  const Checkpoint c = train_logged(cfg, data, "overfit");
  const double elapsed = seconds_since(t0);
  const EvalReport r = evaluate_model(c.model, data);
  const double acc = r.relative_accuracy[1];
  return {acc >= 0.95 && elapsed < 600.0,
          fmt("64 images, 500 iterations: e<=0.1 on %.1f%% (need 95%%), swap rate %.1f%%, %.0f s (limit 600 s)",
              100 * acc, 100 * r.swap_rate, elapsed)};
}

fs::path trained_model_path() { return g_work / "generalization.siam"; }

Outcome generalization() {
  const TrainData all = make_corpus(6001, 2500);
  const TrainData train_set = slice(all, 0, 2000), held_out = slice(all, 2000, 2500);
  const TrainConfig cfg = train_config_from(RunConfig{});
  const auto t0 = std::chrono::steady_clock::now();
  const Checkpoint c = train_logged(cfg, train_set, "generalization");
  const double elapsed = seconds_since(t0);
  fs::create_directories(g_work);
  save_checkpoint(trained_model_path(), c);
  const EvalReport r = evaluate_model(c.model, held_out);
  std::ofstream(g_work / "generalization_report.json") << r.to_json().dump(2) << '\n';
  const double a25 = r.relative_accuracy[4], a10 = r.relative_accuracy[1];
  return {a25 >= 0.95 && a10 >= 0.80 && r.swap_rate <= 0.01,
          fmt("2000 train / 500 held-out, %d iterations: e<=0.25 %.1f%% (need 95%%), e<=0.1 %.1f%% (need 80%%), "
              "swap %.2f%% (max 1%%), train %.0f s",
              cfg.iterations, 100 * a25, 100 * a10, 100 * r.swap_rate, elapsed)};
}

// The generalization model when available, otherwise a briefly trained one.
DetectorModel trained_model(std::string& source) {
  if (fs::exists(trained_model_path())) {
    source = "generalization model";
    return load_checkpoint(trained_model_path()).model;
  }
  source = "fallback model (64 images, 100 iterations)";
  TrainConfig cfg = train_config_from(RunConfig{});
  cfg.iterations = 100;
  return train_logged(cfg, make_corpus(7001, 64), "fallback").model;
}

Outcome latency() {
  set_worker_count(1);
  const DetectorModel model = make_model(BackboneConfig{}, 8001, GrayImage(24, 24, 128));
  const LatencyStats s = benchmark_latency(model, 123, 96, 100, 10, true);
  return {s.mean_ms < 33.0, fmt("123x96 folded, 1 worker, %d runs: mean %.2f ms, p50 %.2f ms, p95 %.2f ms (budget 33 ms)",
                                s.runs, s.mean_ms, s.p50_ms, s.p95_ms)};
}

Outcome fold_equivalence() {
  std::string source;
  const DetectorModel model = trained_model(source);
  const FoldedBackbone folded = fold_batchnorm(model.backbone);
  const TrainData data = make_corpus(9001, 200);
  double worst = 0.0;
  for (const auto& img : data.images) {
    const DetectionPair a = detect(model, img), b = detect(model, img, &folded);
    worst = std::max({worst, euclidean(a.right.position, b.right.position), euclidean(a.left.position, b.left.position)});
  }
  return {worst <= 0.5, fmt("200 images, %s: max folded/unfolded distance %.4f px (limit 0.5)", source.c_str(), worst)};
}

Outcome determinism() {
  auto run = [] {
    const TrainData all = make_corpus(10001, 160);
    TrainConfig cfg = train_config_from(RunConfig{});
    cfg.iterations = 60;
    const Checkpoint c = train_logged(cfg, slice(all, 0, 128), "determinism");
    return std::pair{evaluate_model(c.model, slice(all, 128, 160)).to_json().dump(), encode_checkpoint(c)};
  };
  const auto a = run();
  const auto b = run();
  const bool same_report = a.first == b.first, same_weights = a.second == b.second;
  return {same_report && same_weights, fmt("two 60-iteration train+eval runs: reports %s, checkpoints %s",
                                           same_report ? "identical" : "differ", same_weights ? "identical" : "differ")};
}

Outcome serialization() {
  std::string source;
  Checkpoint original{trained_model(source), train_config_to_flat(train_config_from(RunConfig{})), 0};
  fs::create_directories(g_work);
  const fs::path path = g_work / "serialization.siam";
  save_checkpoint(path, original);
  const Checkpoint loaded = load_checkpoint(path);
  const FoldedBackbone fa = fold_batchnorm(original.model.backbone), fb = fold_batchnorm(loaded.model.backbone);
  const TrainData data = make_corpus(11001, 50);
  int mismatches = 0;
  for (const auto& img : data.images) {
    const DetectionPair a = detect(original.model, img, &fa), b = detect(loaded.model, img, &fb);
    mismatches += a.right.position != b.right.position || a.left.position != b.left.position ||
                  a.right.score != b.right.score || a.left.score != b.left.score;
  }
  return {mismatches == 0, fmt("50 images, %s: %d detections differ after save/load", source.c_str(), mismatches)};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {"gradients", gradients},
    {"similarity_oracle", similarity_oracle},
    {"loss_oracle", loss_oracle},
    {"geometry", geometry},
    {"overfit", overfit},
    {"generalization", generalization},
    {"latency", latency},
    {"fold_equivalence", fold_equivalence},
    {"determinism", determinism},
    {"serialization", serialization},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else if (arg == "--list") {
      for (const auto& [name, fn] : kCriteria) std::cout << name << '\n';
      return 0;
    } else {
      selected.push_back(arg);
    }
  }
  for (const auto& name : selected) {
    if (std::none_of(kCriteria.begin(), kCriteria.end(), [&](const auto& c) { return c.first == name; })) {
      std::cerr << "unknown criterion '" << name << "'\n";
      return 2;
    }
  }

  int failures = 0;
  for (const auto& [name, fn] : kCriteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << fmt(" [%.1f s]", seconds_since(t0))
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
