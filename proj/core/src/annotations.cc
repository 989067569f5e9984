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

#include "siamedp/annotations.h"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "siamedp/error.h"

namespace siamedp {
namespace {

using nlohmann::json;

[[noreturn]] void fail(int line, const std::string& msg) {
  throw FormatError("annotations line " + std::to_string(line) + ": " + msg);
}

double number_field(const json& obj, const char* key, int line) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(line, std::string("missing field '") + key + "'");
  if (!it->is_number()) fail(line, std::string("field '") + key + "' is not a number");
  return it->get<double>();
}

}  // namespace

AnnotationSet parse_annotations(const std::string& text) {
  AnnotationSet set;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(raw);
    } catch (const json::parse_error& e) {
      fail(line, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) fail(line, "expected a JSON object");

    if (!have_header) {
      if (!obj.contains("version")) fail(line, "first line must be the header with 'version'");
      if (obj["version"] != kAnnotationVersion) fail(line, "unsupported annotation version");
      set.width = static_cast<int>(number_field(obj, "width", line));
      set.height = static_cast<int>(number_field(obj, "height", line));
      if (set.width <= 0 || set.height <= 0) fail(line, "header width/height must be positive");
      auto conv = obj.find("side_convention");
      if (conv == obj.end() || !conv->is_string()) fail(line, "missing field 'side_convention'");
      set.side_convention = conv->get<std::string>();
      if (set.side_convention != kSideConvention) {
        fail(line, "unsupported side_convention '" + set.side_convention + "'");
      }
      have_header = true;
      continue;
    }

    Annotation a;
    auto img = obj.find("image");
    if (img == obj.end() || !img->is_string()) fail(line, "missing field 'image'");
    a.image = img->get<std::string>();
    a.right = {number_field(obj, "rx", line), number_field(obj, "ry", line)};
    a.left = {number_field(obj, "lx", line), number_field(obj, "ly", line)};
    for (const Vec2& p : {a.right, a.left}) {
      if (p.x < 0 || p.y < 0 || p.x >= set.width || p.y >= set.height) {
        std::ostringstream msg;
        msg << "coordinate (" << p.x << ", " << p.y << ") outside " << set.width << "x" << set.height << " image";
        fail(line, msg.str());
      }
    }
    set.records.push_back(std::move(a));
  }
  if (!have_header) throw FormatError("annotations: missing header line");
  return set;
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open annotations " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_annotations(buf.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string format_annotations(const AnnotationSet& set) {
  std::string out;
  json header = {{"version", kAnnotationVersion},
                 {"width", set.width},
                 {"height", set.height},
                 {"side_convention", set.side_convention}};
  out += header.dump() + "\n";
  for (const auto& a : set.records) {
    json rec = {{"image", a.image}, {"rx", a.right.x}, {"ry", a.right.y}, {"lx", a.left.x}, {"ly", a.left.y}};
    out += rec.dump() + "\n";
  }
  return out;
}

void save_annotations(const std::filesystem::path& path, const AnnotationSet& set) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write annotations " + path.string());
  out << format_annotations(set);
  if (!out) throw Error("failed writing annotations " + path.string());
}

}  // namespace siamedp
