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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "siamedp/annotations.h"
#include "siamedp/backbone.h"
#include "siamedp/config.h"
#include "siamedp/error.h"
#include "siamedp/image.h"
#include "siamedp/metrics.h"
#include "siamedp/model.h"
#include "siamedp/parallel.h"
#include "siamedp/reference.h"
#include "siamedp/serialize.h"
#include "siamedp/synth.h"
#include "siamedp/train.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace siamedp;

namespace {

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_file, "JSON file of flat dotted keys")->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides, "Override a config key (key=value), repeatable");
  cmd->add_option("--seed", opts.seed, "Top-level seed");
}

RunConfig resolve(const CommonOptions& opts) {
  RunConfig config;
  if (!opts.config_file.empty()) config.merge_file(opts.config_file);
  for (const auto& o : opts.overrides) config.apply_override(o);
  if (opts.seed) config.set("seed", *opts.seed);
  const int workers = config.get("workers").get<int>();
  if (workers > 0) set_worker_count(workers);
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

int cmd_synth(const CommonOptions& common, const std::string& out_dir, int n) {
  RunConfig config = resolve(common);
  if (n <= 0) throw Error("synth: --n must be positive");
  const SynthConfig sc = synth_config_from(config);
  const auto samples = synth_generate(sc, n);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw Error("synth: cannot create output directory " + out_dir);
  for (const auto& s : samples) write_pgm(fs::path(out_dir) / s.annotation.image, s.image);
  save_annotations(fs::path(out_dir) / "annotations.jsonl", annotations_of(samples, sc.width, sc.height));
  std::printf("wrote %d images (%dx%d, seed %llu) and annotations.jsonl to %s\n", n, sc.width, sc.height,
              static_cast<unsigned long long>(sc.seed), out_dir.c_str());
  return 0;
}

int cmd_train(const CommonOptions& common, const std::string& data_path, const std::string& out_path,
              const std::string& log_path, const std::string& resume_path, const std::string& checkpoint_dir,
              std::optional<int> iterations) {
  RunConfig config = resolve(common);
  if (iterations) config.set("train.iterations", *iterations);
  std::optional<Checkpoint> resume;
  if (!resume_path.empty()) resume = load_checkpoint(resume_path);
  const TrainConfig tc = train_config_from(config);
  std::cerr << "effective config: " << config.values().dump() << '\n';

  TrainData all = load_corpus(data_path);
  const int holdout = config.get("train.holdout").get<int>();
  if (holdout < 0 || (holdout > 0 && static_cast<std::size_t>(holdout) >= all.size())) {
    throw Error("train: holdout must leave at least one training image");
  }
  TrainData train_set, holdout_set;
  const std::size_t n_train = all.size() - static_cast<std::size_t>(holdout);
  for (std::size_t i = 0; i < all.size(); ++i) {
    TrainData& dst = i < n_train ? train_set : holdout_set;
    dst.images.push_back(std::move(all.images[i]));
    dst.annotations.push_back(all.annotations[i]);
  }

  std::ofstream log_file;
  if (!log_path.empty()) {
    log_file.open(log_path);
    if (!log_file) throw Error("cannot write log " + log_path);
  }
  TrainOptions options;
  options.log = log_path.empty() ? &std::cout : &log_file;
  options.holdout = holdout > 0 ? &holdout_set : nullptr;
  options.run_config = config.values();
  if (!checkpoint_dir.empty()) {
    fs::create_directories(checkpoint_dir);
    options.checkpoint_dir = checkpoint_dir;
  }
  const Checkpoint ck = train(tc, train_set, options, resume ? &*resume : nullptr);
  save_checkpoint(out_path, ck);
  std::cerr << "saved checkpoint at iteration " << ck.iteration << " to " << out_path << '\n';
  return 0;
}

json detection_record(const std::string& image, const DetectionPair& d) {
  return {{"image", image},
          {"right_x", d.right.position.x},
          {"right_y", d.right.position.y},
          {"left_x", d.left.position.x},
          {"left_y", d.left.position.y},
          {"right_score", d.right.score},
          {"left_score", d.left.score}};
}

int cmd_detect(const CommonOptions& common, const std::string& model_path, std::vector<std::string> images,
               const std::string& annotations, bool unfolded, const std::string& out_path) {
  resolve(common);
  const Checkpoint ck = load_checkpoint(model_path);
  std::optional<FoldedBackbone> folded;
  if (!unfolded) folded = fold_batchnorm(ck.model.backbone);

  std::vector<std::pair<std::string, fs::path>> jobs;
  for (const auto& img : images) jobs.emplace_back(img, img);
  if (!annotations.empty()) {
    const fs::path file = fs::is_directory(annotations) ? fs::path(annotations) / "annotations.jsonl" : fs::path(annotations);
    for (const auto& a : load_annotations(file).records) jobs.emplace_back(a.image, file.parent_path() / a.image);
  }
  if (jobs.empty()) throw Error("detect: no images given");

  std::ofstream out_file;
  if (!out_path.empty()) {
    out_file.open(out_path);
    if (!out_file) throw Error("cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : out_file;
  int ok = 0;
  for (const auto& [name, path] : jobs) {
    try {
      const GrayImage image = read_pgm(path);
      const DetectionPair d = detect(ck.model, image, folded ? &*folded : nullptr);
      out << detection_record(name, d).dump() << '\n';
      ++ok;
    } catch (const std::exception& e) {
      std::cerr << "detect: " << path.string() << ": " << e.what() << '\n';
    }
  }
  out.flush();
  if (ok == 0) return 1;
  return ok == static_cast<int>(jobs.size()) ? 0 : 2;
}

int cmd_eval(const std::string& detections_path, const std::string& annotations_path, const std::string& json_out,
             const std::string& csv_out) {
  const fs::path ann_file =
      fs::is_directory(annotations_path) ? fs::path(annotations_path) / "annotations.jsonl" : fs::path(annotations_path);
  const AnnotationSet truth = load_annotations(ann_file);
  std::map<std::string, EyePair> predicted;
  std::ifstream in(detections_path);
  if (!in) throw Error("cannot open detections " + detections_path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      predicted[j.at("image").get<std::string>()] = {{j.at("right_x").get<double>(), j.at("right_y").get<double>()},
                                                     {j.at("left_x").get<double>(), j.at("left_y").get<double>()}};
    } catch (const json::exception& e) {
      throw FormatError(detections_path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::vector<std::string> names;
  std::vector<EyePair> preds, gts;
  for (const auto& a : truth.records) {
    auto it = predicted.find(a.image);
    if (it == predicted.end()) throw Error("eval: no detection for " + a.image);
    names.push_back(a.image);
    preds.push_back(it->second);
    gts.push_back(eye_pair(a));
  }
  const EvalReport report = evaluate(names, preds, gts);
  std::cout << report.to_table();
  if (!json_out.empty()) write_text(json_out, report.to_json().dump(2) + "\n");
  if (!csv_out.empty()) write_text(csv_out, report.to_csv());
  return 0;
}

int cmd_bench(const CommonOptions& common, const std::string& model_path, std::optional<int> width,
              std::optional<int> height, std::optional<int> runs, bool unfolded) {
  RunConfig config = resolve(common);
  if (width) config.set("bench.width", *width);
  if (height) config.set("bench.height", *height);
  if (runs) config.set("bench.runs", *runs);
  if (unfolded) config.set("bench.folded", false);
  DetectorModel model;
  if (!model_path.empty()) {
    model = load_checkpoint(model_path).model;
  } else {
    const TrainConfig tc = train_config_from(config);
    model = make_model(tc.backbone, tc.seed, GrayImage(kReferenceSize, kReferenceSize, 128));
  }
  const LatencyStats s =
      benchmark_latency(model, config.get("bench.width").get<int>(), config.get("bench.height").get<int>(),
                        config.get("bench.runs").get<int>(), config.get("bench.warmup").get<int>(),
                        config.get("bench.folded").get<bool>());
  std::cout << latency_to_json(s).dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Siamese eye-pair detector: synthesize, train, detect, evaluate, benchmark"};
  app.require_subcommand(1);

  CommonOptions synth_opts, train_opts, detect_opts, bench_opts;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus of PGM images and annotations");
  std::string synth_out;
  int synth_n = 0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--n", synth_n, "Number of images")->required();
  add_common(synth, synth_opts);

  auto* trainc = app.add_subcommand("train", "Train a detector and write a checkpoint");
  std::string data_path, train_out, log_path, resume_path, ckpt_dir;
  std::optional<int> iterations;
  trainc->add_option("--data", data_path, "Corpus directory or annotation file")->required();
  trainc->add_option("--out", train_out, "Checkpoint path")->required();
  trainc->add_option("--log", log_path, "Training log (JSON lines); stdout if omitted");
  trainc->add_option("--resume", resume_path, "Resume from a checkpoint")->check(CLI::ExistingFile);
  trainc->add_option("--checkpoint-dir", ckpt_dir, "Directory for periodic checkpoints");
  trainc->add_option("--iterations", iterations, "Total iterations");
  add_common(trainc, train_opts);

  auto* detectc = app.add_subcommand("detect", "Detect both eyes in PGM images");
  std::string model_path, det_annotations, det_out;
  std::vector<std::string> det_images;
  bool det_unfolded = false;
  detectc->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
  detectc->add_option("images", det_images, "PGM images");
  detectc->add_option("--annotations", det_annotations, "Detect every image listed in an annotation file");
  detectc->add_flag("--unfolded", det_unfolded, "Use the batchnorm backbone instead of the folded one");
  detectc->add_option("--out", det_out, "Output JSON lines; stdout if omitted");
  add_common(detectc, detect_opts);

  auto* evalc = app.add_subcommand("eval", "Score detections against annotations");
  std::string eval_det, eval_ann, eval_json, eval_csv;
  evalc->add_option("--detections", eval_det, "Detections (JSON lines)")->required();
  evalc->add_option("--annotations", eval_ann, "Annotation file or corpus directory")->required();
  evalc->add_option("--json", eval_json, "Write the report as JSON");
  evalc->add_option("--csv", eval_csv, "Write per-image errors as CSV");

  auto* benchc = app.add_subcommand("bench", "Time full detect calls");
  std::string bench_model;
  std::optional<int> bench_w, bench_h, bench_runs;
  bool bench_unfolded = false;
  benchc->add_option("--model", bench_model, "Checkpoint; a fresh model if omitted")->check(CLI::ExistingFile);
  benchc->add_option("--width", bench_w, "Image width");
  benchc->add_option("--height", bench_h, "Image height");
  benchc->add_option("--runs", bench_runs, "Timed runs");
  benchc->add_flag("--unfolded", bench_unfolded, "Time the batchnorm backbone");
  add_common(benchc, bench_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(synth)) return cmd_synth(synth_opts, synth_out, synth_n);
    if (app.got_subcommand(trainc)) {
      return cmd_train(train_opts, data_path, train_out, log_path, resume_path, ckpt_dir, iterations);
    }
    if (app.got_subcommand(detectc)) {
      return cmd_detect(detect_opts, model_path, det_images, det_annotations, det_unfolded, det_out);
    }
    if (app.got_subcommand(evalc)) return cmd_eval(eval_det, eval_ann, eval_json, eval_csv);
    if (app.got_subcommand(benchc)) return cmd_bench(bench_opts, bench_model, bench_w, bench_h, bench_runs, bench_unfolded);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
