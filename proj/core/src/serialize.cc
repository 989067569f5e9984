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

#include "siamedp/serialize.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "siamedp/error.h"
#include "siamedp/reference.h"

namespace siamedp {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");
static_assert(sizeof(float) == 4);

class Writer {
 public:
  void add(const std::string& name, const Tensor& t) {
    entries_.push_back({{"name", name}, {"shape", t.shape().dims()}});
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
    payload_.insert(payload_.end(), p, p + t.size() * sizeof(float));
  }

  std::vector<std::uint8_t> finish(json header) {
    header["tensors"] = entries_;
    const std::string text = header.dump();
    std::vector<std::uint8_t> out(kContainerMagic, kContainerMagic + 8);
    const std::uint64_t len = text.size();
    const auto* lp = reinterpret_cast<const std::uint8_t*>(&len);
    out.insert(out.end(), lp, lp + 8);
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), payload_.begin(), payload_.end());
    return out;
  }

 private:
  json entries_ = json::array();
  std::vector<std::uint8_t> payload_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kContainerMagic, 8) != 0) {
      throw FormatError("container: bad magic");
    }
    std::uint64_t len = 0;
    std::memcpy(&len, bytes.data() + 8, 8);
    if (len > bytes.size() - 16) throw FormatError("container: truncated header");
    try {
      header_ = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
    } catch (const json::exception& e) {
      throw FormatError(std::string("container: invalid header: ") + e.what());
    }
    if (header_.value("format_version", -1) != kContainerVersion) throw FormatError("container: unsupported version");
    if (header_.value("precision", "") != "float32") throw FormatError("container: unsupported precision");
    std::size_t offset = 16 + len;
    for (const auto& e : header_.at("tensors")) {
      const std::vector<int> dims = e.at("shape").get<std::vector<int>>();
      if (dims.empty() || dims.size() > Shape::kMaxRank) throw FormatError("container: bad tensor rank");
      const Shape shape{std::span<const int>(dims)};
      const std::size_t nbytes = shape.numel() * sizeof(float);
      if (offset + nbytes > bytes.size()) throw FormatError("container: truncated tensor data");
      Tensor t(shape);
      std::memcpy(t.data(), bytes.data() + offset, nbytes);
      offset += nbytes;
      tensors_.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
    if (offset != bytes.size()) throw FormatError("container: trailing bytes");
  }

  const json& header() const { return header_; }

  Tensor take(const std::string& name, const Shape& expected) {
    if (next_ >= tensors_.size()) throw FormatError("container: missing tensor " + name);
    auto& [stored, t] = tensors_[next_++];
    if (stored != name) throw FormatError("container: expected tensor " + name + ", found " + stored);
    if (!(t.shape() == expected)) {
      throw FormatError("container: tensor " + name + " has shape " + t.shape().str() + ", expected " +
                        expected.str());
    }
    return std::move(t);
  }

  Tensor take_any(const std::string& name) {
    if (next_ >= tensors_.size() || tensors_[next_].first != name) throw FormatError("container: missing tensor " + name);
    return std::move(tensors_[next_++].second);
  }

  void finish() const {
    if (next_ != tensors_.size()) throw FormatError("container: unexpected extra tensors");
  }

 private:
  json header_;
  std::vector<std::pair<std::string, Tensor>> tensors_;
  std::size_t next_ = 0;
};

void write_backbone(Writer& w, const Backbone<float>& backbone) {
  Backbone<float> copy = backbone;
  copy.for_each_tensor([&](const std::string& name, Tensor& t) { w.add("backbone." + name, t); });
}

Backbone<float> read_backbone(Reader& r, const json& topology) {
  Backbone<float> backbone = Backbone<float>::build(backbone_config_from_json(topology), 0);
  backbone.for_each_tensor([&](const std::string& name, Tensor& t) { t = r.take("backbone." + name, t.shape()); });
  return backbone;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

json base_header(const char* kind, const BackboneConfig& config) {
  return {{"format_version", kContainerVersion},
          {"kind", kind},
          {"precision", "float32"},
          {"topology", backbone_config_to_json(config)}};
}

template <typename F>
auto with_path(const std::filesystem::path& path, F&& f) {
  try {
    return f(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

json backbone_config_to_json(const BackboneConfig& c) {
  return {{"stem_channels", c.stem_channels},
          {"stem_stride", c.stem_stride},
          {"stage_channels", c.stage_channels},
          {"stage_strides", c.stage_strides},
          {"blocks_per_stage", c.blocks_per_stage}};
}

BackboneConfig backbone_config_from_json(const json& j) {
  BackboneConfig c;
  c.stem_channels = j.at("stem_channels").get<int>();
  c.stem_stride = j.at("stem_stride").get<int>();
  c.stage_channels = j.at("stage_channels").get<std::array<int, 4>>();
  c.stage_strides = j.at("stage_strides").get<std::array<int, 4>>();
  c.blocks_per_stage = j.at("blocks_per_stage").get<int>();
  return c;
}

std::vector<std::uint8_t> encode_backbone(const Backbone<float>& backbone) {
  Writer w;
  write_backbone(w, backbone);
  return w.finish(base_header("backbone", backbone.config()));
}

Backbone<float> decode_backbone(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.header().value("kind", "") != "backbone") throw FormatError("container: not a backbone file");
  Backbone<float> b = read_backbone(r, r.header().at("topology"));
  r.finish();
  return b;
}

void save_backbone(const std::filesystem::path& path, const Backbone<float>& backbone) {
  write_file(path, encode_backbone(backbone));
}

Backbone<float> load_backbone(const std::filesystem::path& path) {
  return with_path(path, [](const std::vector<std::uint8_t>& b) { return decode_backbone(b); });
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  const DetectorModel& m = ck.model;
  Writer w;
  write_backbone(w, m.backbone);
  w.add("head.weight", m.head.weight);
  w.add("reference.right", m.ref_right);
  w.add("reference.left", m.ref_left);
  Tensor image(Shape{m.reference_image.height, m.reference_image.width});
  for (std::size_t i = 0; i < image.size(); ++i) image[i] = m.reference_image.pixels[i];
  w.add("reference.image", image);
  json header = base_header("checkpoint", m.backbone.config());
  header["iteration"] = ck.iteration;
  header["alpha"] = m.alpha;
  header["cosface"] = {{"scale", m.cosface.scale}, {"margin", m.cosface.margin}, {"form", to_string(m.cosface.form)}};
  header["config"] = ck.config;
  return w.finish(std::move(header));
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const json& h = r.header();
  if (h.value("kind", "") != "checkpoint") throw FormatError("container: not a checkpoint file");
  Checkpoint ck;
  DetectorModel& m = ck.model;
  m.backbone = read_backbone(r, h.at("topology"));
  const int c = m.backbone.config().output_channels();
  m.head.weight = r.take("head.weight", Shape{2, c});
  m.ref_right = r.take_any("reference.right");
  m.ref_left = r.take_any("reference.left");
  if (!(m.ref_right.shape() == m.ref_left.shape()) || m.ref_right.rank() != 4 || m.ref_right.c() != c) {
    throw FormatError("container: reference features have inconsistent shapes");
  }
  const Tensor image = r.take("reference.image", Shape{kReferenceSize, kReferenceSize});
  m.reference_image = GrayImage(kReferenceSize, kReferenceSize);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float v = image[i];
    if (!(v >= 0.0f && v <= 255.0f) || v != static_cast<float>(static_cast<int>(v))) {
      throw FormatError("container: reference image pixel out of range");
    }
    m.reference_image.pixels[i] = static_cast<std::uint8_t>(v);
  }
  r.finish();
  m.alpha = h.at("alpha").get<float>();
  const json& cf = h.at("cosface");
  m.cosface.scale = cf.at("scale").get<double>();
  m.cosface.margin = cf.at("margin").get<double>();
  m.cosface.form = cosface_form_from_string(cf.at("form").get<std::string>());
  ck.config = h.at("config");
  ck.iteration = h.at("iteration").get<std::int64_t>();
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return with_path(path, [](const std::vector<std::uint8_t>& b) { return decode_checkpoint(b); });
}

}  // namespace siamedp
