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

#include "siamedp/config.h"

#include <fstream>

#include "siamedp/error.h"
#include "siamedp/serialize.h"

namespace siamedp {
namespace {

using nlohmann::json;

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    return !a.is_number_integer() || b.is_number_integer() ||
           (b.is_number_float() && b.get<double>() == static_cast<double>(static_cast<long long>(b.get<double>())));
  }
  return a.type() == b.type();
}

json normalized(const json& like, json value) {
  if (like.is_number_integer() && value.is_number_float()) return static_cast<long long>(value.get<double>());
  return value;
}

template <typename T>
T num(const RunConfig& c, const char* key) {
  return c.get(key).get<T>();
}

}  // namespace

const json& RunConfig::defaults() {
  static const json d = [] {
    const SynthConfig s;
    const TrainConfig t;
    json out = train_config_to_flat(t);
    out["seed"] = 1;
    out["workers"] = 0;
    out["synth.width"] = s.width;
    out["synth.height"] = s.height;
    out["synth.iris_radius_min"] = s.iris_radius_min;
    out["synth.iris_radius_max"] = s.iris_radius_max;
    out["synth.eye_distance_min"] = s.eye_distance_min;
    out["synth.eye_distance_max"] = s.eye_distance_max;
    out["synth.max_roll_degrees"] = s.max_roll_degrees;
    out["synth.background_amplitude"] = s.background_amplitude;
    out["synth.noise_sigma"] = s.noise_sigma;
    out["synth.gaze_jitter"] = s.gaze_jitter;
    out["train.holdout"] = 0;
    out["bench.width"] = 123;
    out["bench.height"] = 96;
    out["bench.runs"] = 100;
    out["bench.warmup"] = 10;
    out["bench.folded"] = true;
    return out;
  }();
  return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::set(const std::string& key, json value) {
  const json& d = defaults();
  auto it = d.find(key);
  if (it == d.end()) throw Error("config: unknown key '" + key + "'");
  if (!same_kind(*it, value)) {
    throw Error("config: key '" + key + "' expects a value like " + it->dump() + ", got " + value.dump());
  }
  values_[key] = normalized(*it, std::move(value));
}

void RunConfig::merge(const json& flat) {
  if (!flat.is_object()) throw Error("config: expected a JSON object of dotted keys");
  for (auto it = flat.begin(); it != flat.end(); ++it) set(it.key(), it.value());
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open " + path.string());
  json flat;
  try {
    flat = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config: " + path.string() + ": " + e.what());
  }
  merge(flat);
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("config: override must be key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set(key, std::move(value));
}

const json& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("config: unknown key '" + key + "'");
  return *it;
}

SynthConfig synth_config_from(const RunConfig& c) {
  SynthConfig s;
  s.seed = num<std::uint64_t>(c, "seed");
  s.width = num<int>(c, "synth.width");
  s.height = num<int>(c, "synth.height");
  s.iris_radius_min = num<double>(c, "synth.iris_radius_min");
  s.iris_radius_max = num<double>(c, "synth.iris_radius_max");
  s.eye_distance_min = num<double>(c, "synth.eye_distance_min");
  s.eye_distance_max = num<double>(c, "synth.eye_distance_max");
  s.max_roll_degrees = num<double>(c, "synth.max_roll_degrees");
  s.background_amplitude = num<double>(c, "synth.background_amplitude");
  s.noise_sigma = num<double>(c, "synth.noise_sigma");
  s.gaze_jitter = num<double>(c, "synth.gaze_jitter");
  return s;
}

TrainConfig train_config_from(const RunConfig& c) {
  TrainConfig t = train_config_from_flat(c.values());
  t.seed = num<std::uint64_t>(c, "seed");
  return t;
}

json train_config_to_flat(const TrainConfig& t) {
  json out = {
      {"train.lr_first_epoch", t.lr_first_epoch},
      {"train.lr_rest", t.lr_rest},
      {"train.weight_decay", t.weight_decay},
      {"train.batch_size", t.batch_size},
      {"train.iterations", t.iterations},
      {"train.checkpoint_interval", t.checkpoint_interval},
      {"train.log_interval", t.log_interval},
      {"train.eval_interval", t.eval_interval},
      {"train.reference_cap", t.reference_cap},
      {"cosface.scale", t.cosface.scale},
      {"cosface.margin", t.cosface.margin},
      {"cosface.form", to_string(t.cosface.form)},
      {"loss.beta", t.weights.heatmap},
      {"loss.gamma", t.weights.position},
      {"seed", t.seed},
  };
  const json bb = backbone_config_to_json(t.backbone);
  for (auto it = bb.begin(); it != bb.end(); ++it) out["backbone." + it.key()] = it.value();
  return out;
}

TrainConfig train_config_from_flat(const json& f) {
  TrainConfig t;
  auto get = [&](const char* key) -> const json& {
    auto it = f.find(key);
    if (it == f.end()) throw Error(std::string("config: missing key '") + key + "'");
    return *it;
  };
  t.lr_first_epoch = get("train.lr_first_epoch").get<double>();
  t.lr_rest = get("train.lr_rest").get<double>();
  t.weight_decay = get("train.weight_decay").get<double>();
  t.batch_size = get("train.batch_size").get<int>();
  t.iterations = get("train.iterations").get<int>();
  t.checkpoint_interval = get("train.checkpoint_interval").get<int>();
  t.log_interval = get("train.log_interval").get<int>();
  t.eval_interval = get("train.eval_interval").get<int>();
  t.reference_cap = get("train.reference_cap").get<int>();
  t.cosface.scale = get("cosface.scale").get<double>();
  t.cosface.margin = get("cosface.margin").get<double>();
  t.cosface.form = cosface_form_from_string(get("cosface.form").get<std::string>());
  t.weights.heatmap = get("loss.beta").get<double>();
  t.weights.position = get("loss.gamma").get<double>();
  t.seed = get("seed").get<std::uint64_t>();
  json bb;
  for (const char* k : {"stem_channels", "stem_stride", "stage_channels", "stage_strides", "blocks_per_stage"}) {
    bb[k] = get(("backbone." + std::string(k)).c_str());
  }
  t.backbone = backbone_config_from_json(bb);
  return t;
}

}  // namespace siamedp
