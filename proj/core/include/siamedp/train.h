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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "siamedp/annotations.h"
#include "siamedp/backbone.h"
#include "siamedp/image.h"
#include "siamedp/losses.h"
#include "siamedp/model.h"
#include "siamedp/serialize.h"

namespace siamedp {

struct TrainConfig {
  double lr_first_epoch = 0.1;
  double lr_rest = 0.01;
  double weight_decay = 1e-4;
  int batch_size = 16;
  int iterations = 2000;
  CosFaceParams cosface;
  LossWeights weights;
  std::uint64_t seed = 1;
  int checkpoint_interval = 0;  // 0 disables intermediate checkpoints
  int log_interval = 10;
  int eval_interval = 100;      // held-out heat-map accuracy cadence
  int reference_cap = 128;
  BackboneConfig backbone;

  void validate() const;
};

struct TrainData {
  std::vector<GrayImage> images;
  std::vector<Annotation> annotations;

  std::size_t size() const { return images.size(); }
  void validate() const;
};

// Reads an annotation file (or `dir/annotations.jsonl` for a directory) and
// the PGM images it lists, resolved relative to the annotation file. Throws
// naming the missing path or an image whose size differs from the header.
TrainData load_corpus(const std::filesystem::path& path);

// Everything the loss needs besides parameters and data.
struct Objective {
  CosFaceParams cosface;
  LossWeights weights;
  double alpha = 8.0;
};

template <typename T>
struct ModelGrads {
  BackboneGrads<T> backbone;
  BasicTensor<T> head;  // 2 x c
};

struct StepResult {
  double loss = 0.0;
  LossComponents parts;  // batch means
};

// Forward pass over {search batch, reference pair} in train mode with
// batchnorm statistics pooled over both, losses for both sides of every
// image, and, when `grads` is non-null, gradients of the batch-mean loss
// accumulated into `grads`. `trace` receives the backbone trace so running
// statistics can be committed afterwards.
template <typename T>
StepResult forward_backward(const Backbone<T>& backbone, const RegressionHead<T>& head, const BasicTensor<T>& search,
                            const BasicTensor<T>& reference_pair, const std::vector<Annotation>& truth,
                            const Objective& objective, ModelGrads<T>* grads, BackboneTrace<T>* trace = nullptr);

// One SGD update on a batch: forward_backward, p -= lr (g + wd p) over the
// backbone and the regression head, then commit batchnorm running
// statistics. The model's cached reference features are left stale.
StepResult train_step(DetectorModel& model, const std::vector<const GrayImage*>& images,
                      const std::vector<Annotation>& truth, const TrainConfig& config, double lr);

// lr_first_epoch while the batch starts inside the first pass over the
// corpus, lr_rest afterwards.
double learning_rate(const TrainConfig& config, std::int64_t iteration, std::size_t corpus_size);

// Corpus indices of the batch for `iteration`: positions [iB, (i+1)B) of an
// endless sequence of per-epoch permutations seeded from (seed, epoch).
// Stateless, so resuming at any iteration reproduces the same order.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::int64_t iteration, int batch_size,
                                       std::size_t corpus_size);

// Mean right-chip reference image over the first `cap` training samples.
GrayImage training_reference(const TrainData& data, int cap);

// Fraction of eyes whose heat-map argmax lands on the ground-truth cell.
double heatmap_accuracy(const DetectorModel& model, const TrainData& data);

struct TrainOptions {
  std::ostream* log = nullptr;              // JSON lines
  const TrainData* holdout = nullptr;       // heat-map accuracy slice
  std::filesystem::path checkpoint_dir;     // empty disables checkpoint files
  nlohmann::json run_config = nlohmann::json::object();
  std::function<void(std::int64_t, const StepResult&)> on_step;
};

// Runs iterations [start, config.iterations), where start is the resumed
// checkpoint's iteration or 0. The returned checkpoint holds eval-mode
// reference features.
Checkpoint train(const TrainConfig& config, const TrainData& data, const TrainOptions& options = {},
                 const Checkpoint* resume = nullptr);

}  // namespace siamedp
