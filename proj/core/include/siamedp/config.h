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

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "siamedp/synth.h"
#include "siamedp/train.h"

namespace siamedp {

// Flat key/value run configuration, e.g. {"train.iterations": 2000}. Every
// key must be one of the defaults and keep the default's JSON type.
class RunConfig {
 public:
  RunConfig();

  static const nlohmann::json& defaults();

  // Merges a JSON object file; rejects unknown keys.
  void merge_file(const std::filesystem::path& path);
  void merge(const nlohmann::json& flat);
  // "key=value"; value is parsed as JSON, falling back to a plain string.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, nlohmann::json value);

  const nlohmann::json& get(const std::string& key) const;
  const nlohmann::json& values() const { return values_; }

  std::string dump() const { return values_.dump(2); }

 private:
  nlohmann::json values_;
};

SynthConfig synth_config_from(const RunConfig& config);
TrainConfig train_config_from(const RunConfig& config);
// Inverse of train_config_from over the train, loss, cosface, and backbone keys.
nlohmann::json train_config_to_flat(const TrainConfig& config);
TrainConfig train_config_from_flat(const nlohmann::json& flat);

}  // namespace siamedp
