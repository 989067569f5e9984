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
#include <vector>

#include <nlohmann/json.hpp>

#include "siamedp/model.h"

namespace siamedp {

// Container layout: 8-byte magic "SIAMEDP1", a little-endian uint64 header
// length, the JSON header text, then each tensor listed in the header as
// little-endian float32 values in header order. Floats are stored bit-exact.
inline constexpr char kContainerMagic[8] = {'S', 'I', 'A', 'M', 'E', 'D', 'P', '1'};
inline constexpr int kContainerVersion = 1;

nlohmann::json backbone_config_to_json(const BackboneConfig& config);
BackboneConfig backbone_config_from_json(const nlohmann::json& j);

std::vector<std::uint8_t> encode_backbone(const Backbone<float>& backbone);
Backbone<float> decode_backbone(const std::vector<std::uint8_t>& bytes);
void save_backbone(const std::filesystem::path& path, const Backbone<float>& backbone);
Backbone<float> load_backbone(const std::filesystem::path& path);

// Full training state: model tensors (including running statistics and the
// cached reference features), the run configuration, and the number of
// completed iterations.
struct Checkpoint {
  DetectorModel model;
  nlohmann::json config = nlohmann::json::object();
  std::int64_t iteration = 0;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace siamedp
