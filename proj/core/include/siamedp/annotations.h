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

#include "siamedp/siamese_head.h"

namespace siamedp {

// "right" and "left" are the subject's anatomical sides. Under this
// convention the subject's right eye appears on the viewer's left.
inline constexpr const char* kSideConvention = "subject_right_on_viewer_left";
inline constexpr int kAnnotationVersion = 1;

struct Annotation {
  std::string image;  // path relative to the annotation file's directory
  Vec2 right;
  Vec2 left;

  bool operator==(const Annotation&) const = default;
};

struct AnnotationSet {
  int width = 0;
  int height = 0;
  std::string side_convention = kSideConvention;
  std::vector<Annotation> records;
};

// JSON lines. First line {version, width, height, side_convention}, then one
// {image, rx, ry, lx, ly} object per line. Errors carry the 1-based line
// number; coordinates must lie inside [0, width) x [0, height).
AnnotationSet load_annotations(const std::filesystem::path& path);
AnnotationSet parse_annotations(const std::string& text);
void save_annotations(const std::filesystem::path& path, const AnnotationSet& set);
std::string format_annotations(const AnnotationSet& set);

}  // namespace siamedp
