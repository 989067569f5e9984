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

#include "siamedp/train.h"

#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "siamedp/config.h"
#include "siamedp/error.h"
#include "siamedp/optim.h"
#include "siamedp/random.h"
#include "siamedp/reference.h"

namespace siamedp {
namespace {

inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kOrderStream = 2;

template <typename T>
void add_sample(BasicTensor<T>& dst, int sample, const BasicTensor<T>& src) {
  T* d = dst.sample(sample);
  const T* s = src.data();
  for (std::size_t i = 0; i < src.size(); ++i) d[i] += s[i];
}

std::vector<std::size_t> permutation(std::uint64_t seed, std::uint64_t epoch, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, kOrderStream, epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
  return perm;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr_first_epoch > 0 && lr_rest > 0)) throw Error("train: learning rates must be positive");
  if (weight_decay < 0) throw Error("train: weight decay must be non-negative");
  if (batch_size <= 0) throw Error("train: batch size must be positive");
  if (iterations < 0) throw Error("train: iterations must be non-negative");
  if (checkpoint_interval < 0) throw Error("train: checkpoint interval must be non-negative");
  if (log_interval <= 0 || eval_interval <= 0) throw Error("train: log and eval intervals must be positive");
  if (reference_cap <= 0) throw Error("train: reference cap must be positive");
  if (weights.heatmap < 0 || weights.position < 0) throw Error("train: loss weights must be non-negative");
  cosface.validate();
}

void TrainData::validate() const {
  if (images.empty()) throw Error("train: empty corpus");
  if (images.size() != annotations.size()) throw Error("train: image and annotation counts differ");
  const int w = images.front().width, h = images.front().height;
  check_input_extent(h, w);
  for (const auto& img : images) {
    if (img.width != w || img.height != h) throw ShapeError("train: corpus images differ in size");
  }
}

TrainData load_corpus(const std::filesystem::path& path) {
  const std::filesystem::path file = std::filesystem::is_directory(path) ? path / "annotations.jsonl" : path;
  if (!std::filesystem::exists(file)) throw Error("corpus not found: " + file.string());
  const AnnotationSet set = load_annotations(file);
  TrainData data;
  for (const auto& a : set.records) {
    const std::filesystem::path image_path = file.parent_path() / a.image;
    GrayImage img = read_pgm(image_path);
    if (img.width != set.width || img.height != set.height) {
      throw ShapeError(image_path.string() + ": size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                       " differs from annotation header");
    }
    data.images.push_back(std::move(img));
    data.annotations.push_back(a);
  }
  return data;
}

template <typename T>
StepResult forward_backward(const Backbone<T>& backbone, const RegressionHead<T>& head, const BasicTensor<T>& search,
                            const BasicTensor<T>& reference_pair, const std::vector<Annotation>& truth,
                            const Objective& objective, ModelGrads<T>* grads, BackboneTrace<T>* trace) {
  require_rank4(search.shape(), "forward_backward search");
  const int batch = search.n();
  if (batch == 0) throw Error("forward_backward: empty batch");
  if (truth.size() != static_cast<std::size_t>(batch)) throw Error("forward_backward: annotation count mismatch");
  if (reference_pair.rank() != 4 || reference_pair.n() != 2) throw ShapeError("forward_backward: need a reference pair");

  BackboneTrace<T> local;
  BackboneTrace<T>* tr = trace ? trace : &local;
  const std::array<BasicTensor<T>, 2> groups{search, reference_pair};
  const auto outputs = backbone.forward(groups, Mode::kTrain, grads || trace ? tr : nullptr);
  const BasicTensor<T>& features = outputs[0];
  const std::array<BasicTensor<T>, 2> refs{outputs[1].slice(0, 1), outputs[1].slice(1, 1)};

  const T alpha = static_cast<T>(objective.alpha);
  const int rows = features.h(), cols = features.w(), channels = features.c();
  const double beta = objective.weights.heatmap, gamma = objective.weights.position;

  BasicTensor<T> d_features, d_refs;
  if (grads) {
    d_features = BasicTensor<T>(features.shape());
    d_refs = BasicTensor<T>(outputs[1].shape());
  }

  StepResult result;
  for (int b = 0; b < batch; ++b) {
    for (int s = 0; s < 2; ++s) {
      const Vec2 gt = s == 0 ? truth[b].right : truth[b].left;
      const HeatMap<T> q = similarity_map(features, refs[s], b, alpha);
      const GroundTruthHeatMap y = gt_heatmap(gt, objective.alpha, rows, cols);
      const double heat = static_cast<double>(cosface_bce(q, y, objective.cosface));

      const Cell cell = argmax_heatmap(q);
      const std::vector<T> fiber = extract_eye_feature(features, cell, b);
      const Vec2T<T> dx = regress_offset(head, fiber);
      const Vec2T<T> pos = compose_position(cell, dx, alpha);
      const int mask = position_mask(cell, y.center);
      const double position = static_cast<double>(regression_loss(pos, gt, mask, alpha));

      (s == 0 ? result.parts.heat_right : result.parts.heat_left) += heat / batch;
      (s == 0 ? result.parts.pos_right : result.parts.pos_left) += position / batch;

      if (!grads) continue;
      if (beta != 0.0) {
        std::vector<T> gq = cosface_bce_backward(q, y, objective.cosface);
        const T scale = static_cast<T>(beta / batch);
        for (T& g : gq) g *= scale;
        const SimilarityGrads<T> sg = similarity_map_backward(gq, features, refs[s], b);
        add_sample(d_features, b, sg.search);
        add_sample(d_refs, s, sg.ref);
      }
      if (gamma != 0.0 && mask != 0) {
        const Vec2T<T> gpos = regression_loss_grad(pos, gt, mask, alpha);
        const T gx = alpha * gpos.x * static_cast<T>(gamma / batch);
        const T gy = alpha * gpos.y * static_cast<T>(gamma / batch);
        const T* w = head.weight.data();
        T* gw = grads->head.data();
        for (int c = 0; c < channels; ++c) {
          gw[c] += gx * fiber[c];
          gw[channels + c] += gy * fiber[c];
          d_features.at(b, c, cell.row, cell.col) += w[c] * gx + w[channels + c] * gy;
        }
      }
    }
  }
  result.loss = total_loss(result.parts, objective.weights);

  if (grads) {
    const std::array<BasicTensor<T>, 2> grad_out{std::move(d_features), std::move(d_refs)};
    backbone.backward(grad_out, *tr, grads->backbone);
  }
  return result;
}

StepResult train_step(DetectorModel& model, const std::vector<const GrayImage*>& images,
                      const std::vector<Annotation>& truth, const TrainConfig& config, double lr) {
  if (images.empty()) throw Error("train_step: empty batch");
  const Tensor search = to_batch(images);
  const Tensor refs = reference_pair<float>(model.reference_image);
  ModelGrads<float> grads{model.backbone.zero_grads(), Tensor(model.head.weight.shape())};
  BackboneTrace<float> trace;
  const Objective objective{config.cosface, config.weights, static_cast<double>(model.alpha)};
  const StepResult result = forward_backward(model.backbone, model.head, search, refs, truth, objective, &grads, &trace);

  std::vector<Tensor*> params, grad_list;
  model.backbone.for_each_parameter([&](const std::string&, Tensor& t) { params.push_back(&t); });
  grads.backbone.for_each([&](const std::string&, Tensor& t) { grad_list.push_back(&t); });
  if (params.size() != grad_list.size()) throw Error("train_step: parameter/gradient layout mismatch");
  params.push_back(&model.head.weight);
  grad_list.push_back(&grads.head);
  const float flr = static_cast<float>(lr), fwd = static_cast<float>(config.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    sgd_step<float>(params[i]->span(), std::span<const float>(grad_list[i]->span()), flr, fwd);
  }
  model.backbone.commit_running_stats(trace);
  return result;
}

double learning_rate(const TrainConfig& config, std::int64_t iteration, std::size_t corpus_size) {
  const auto start = static_cast<std::uint64_t>(iteration) * static_cast<std::uint64_t>(config.batch_size);
  return start < corpus_size ? config.lr_first_epoch : config.lr_rest;
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::int64_t iteration, int batch_size,
                                       std::size_t corpus_size) {
  if (corpus_size == 0) throw Error("batch_indices: empty corpus");
  if (batch_size <= 0 || iteration < 0) throw Error("batch_indices: invalid batch or iteration");
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  std::uint64_t cached_epoch = ~std::uint64_t{0};
  std::vector<std::size_t> perm;
  const std::uint64_t begin = static_cast<std::uint64_t>(iteration) * static_cast<std::uint64_t>(batch_size);
  for (std::uint64_t p = begin; p < begin + static_cast<std::uint64_t>(batch_size); ++p) {
    const std::uint64_t epoch = p / corpus_size;
    if (epoch != cached_epoch) {
      perm = permutation(seed, epoch, corpus_size);
      cached_epoch = epoch;
    }
    out.push_back(perm[p % corpus_size]);
  }
  return out;
}

GrayImage training_reference(const TrainData& data, int cap) {
  std::vector<GrayImage> chips;
  const std::size_t count = std::min<std::size_t>(data.size(), static_cast<std::size_t>(cap));
  for (std::size_t i = 0; i < count; ++i) chips.push_back(crop_eye(data.images[i], data.annotations[i].right));
  return build_average_reference(chips, cap);
}

double heatmap_accuracy(const DetectorModel& model, const TrainData& data) {
  if (data.size() == 0) throw Error("heatmap_accuracy: empty data");
  int hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const GrayImage& img = data.images[i];
    const DetectionPair d = detect(model, img);
    const int rows = (img.height + 7) / 8, cols = (img.width + 7) / 8;
    const double a = model.alpha;
    hits += d.right.coarse == quantize_to_cell(data.annotations[i].right, a, rows, cols);
    hits += d.left.coarse == quantize_to_cell(data.annotations[i].left, a, rows, cols);
  }
  return hits / (2.0 * static_cast<double>(data.size()));
}

Checkpoint train(const TrainConfig& config, const TrainData& data, const TrainOptions& options,
                 const Checkpoint* resume) {
  config.validate();
  data.validate();
  if (options.holdout) options.holdout->validate();

  Checkpoint ck;
  if (resume) {
    ck = *resume;
    if (!(ck.model.backbone.config() == config.backbone)) throw Error("train: checkpoint topology differs from config");
    if (ck.iteration > config.iterations) throw Error("train: checkpoint is past the configured iteration count");
  } else {
    ck.model = make_model(config.backbone, derive_seed(config.seed, kInitStream), training_reference(data, config.reference_cap));
  }
  ck.model.cosface = config.cosface;
  ck.config = options.run_config.empty() ? train_config_to_flat(config) : options.run_config;

  DetectorModel& model = ck.model;
  const std::size_t n = data.size();
  for (std::int64_t it = ck.iteration; it < config.iterations; ++it) {
    const auto idx = batch_indices(config.seed, it, config.batch_size, n);
    std::vector<const GrayImage*> images;
    std::vector<Annotation> truth;
    for (std::size_t k : idx) {
      images.push_back(&data.images[k]);
      truth.push_back(data.annotations[k]);
    }
    const double lr = learning_rate(config, it, n);
    const StepResult r = train_step(model, images, truth, config, lr);
    if (!std::isfinite(r.loss)) throw Error("train: loss became non-finite at iteration " + std::to_string(it + 1));
    ck.iteration = it + 1;

    const bool last = ck.iteration == config.iterations;
    const bool eval_now = options.holdout && (ck.iteration % config.eval_interval == 0 || last);
    if (options.log && (ck.iteration % config.log_interval == 0 || it == 0 || last || eval_now)) {
      nlohmann::json line = {{"iter", ck.iteration},
                             {"L", r.loss},
                             {"Ls_R", r.parts.heat_right},
                             {"Ls_L", r.parts.heat_left},
                             {"Lp_R", r.parts.pos_right},
                             {"Lp_L", r.parts.pos_left},
                             {"lr", lr}};
      if (eval_now) {
        refresh_reference_features(model);
        line["heat_acc"] = heatmap_accuracy(model, *options.holdout);
      }
      *options.log << line.dump() << '\n' << std::flush;
    }
    if (options.on_step) options.on_step(ck.iteration, r);
    if (!options.checkpoint_dir.empty() && config.checkpoint_interval > 0 &&
        ck.iteration % config.checkpoint_interval == 0) {
      refresh_reference_features(model);
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_%06lld.siam", static_cast<long long>(ck.iteration));
      save_checkpoint(options.checkpoint_dir / name, ck);
    }
  }
  refresh_reference_features(model);
  return ck;
}

template StepResult forward_backward(const Backbone<float>&, const RegressionHead<float>&, const Tensor&,
                                     const Tensor&, const std::vector<Annotation>&, const Objective&,
                                     ModelGrads<float>*, BackboneTrace<float>*);
template StepResult forward_backward(const Backbone<double>&, const RegressionHead<double>&, const TensorD&,
                                     const TensorD&, const std::vector<Annotation>&, const Objective&,
                                     ModelGrads<double>*, BackboneTrace<double>*);

}  // namespace siamedp
