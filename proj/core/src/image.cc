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

#include "siamedp/image.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "siamedp/error.h"

namespace siamedp {
namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  int next_int(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw FormatError(std::string("PGM: expected ") + what);
    }
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > 1 << 24) throw FormatError(std::string("PGM: ") + what + " too large");
    }
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError("PGM: malformed header end");
    return pos_ + 1;
  }

  std::size_t pos_ = 0;

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
};

}  // namespace

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("PGM: missing P5 magic");
  HeaderReader reader(bytes);
  reader.pos_ = 2;
  const int width = reader.next_int("width");
  const int height = reader.next_int("height");
  const int maxval = reader.next_int("maxval");
  if (width <= 0 || height <= 0) throw FormatError("PGM: non-positive dimensions");
  if (maxval != 255) throw FormatError("PGM: only 8-bit images (maxval 255) are supported");
  const std::size_t start = reader.raster_start();
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() < start + count) throw FormatError("PGM: truncated raster");
  GrayImage img(width, height);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(start), count, img.pixels.begin());
  return img;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_pgm(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image " + path.string());
  const auto bytes = encode_pgm(image);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing image " + path.string());
}

GrayImage flip_horizontal(const GrayImage& image) {
  GrayImage out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) out.at(image.width - 1 - x, y) = image.at(x, y);
  }
  return out;
}

GrayImage crop_eye(const GrayImage& image, Vec2 center, int size) {
  if (image.empty()) throw Error("crop_eye: empty image");
  const int cx = static_cast<int>(std::lround(center.x));
  const int cy = static_cast<int>(std::lround(center.y));
  const int x0 = cx - size / 2;
  const int y0 = cy - size / 2;
  GrayImage chip(size, size);
  for (int y = 0; y < size; ++y) {
    const int sy = std::clamp(y0 + y, 0, image.height - 1);
    for (int x = 0; x < size; ++x) {
      const int sx = std::clamp(x0 + x, 0, image.width - 1);
      chip.at(x, y) = image.at(sx, sy);
    }
  }
  return chip;
}

Tensor to_tensor(const GrayImage& image) {
  Tensor t = Tensor::nchw(1, 1, image.height, image.width);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = image.pixels[i] / 255.0f;
  return t;
}

Tensor to_batch(const std::vector<const GrayImage*>& images) {
  if (images.empty()) throw ShapeError("to_batch: no images");
  const int w = images.front()->width;
  const int h = images.front()->height;
  Tensor t = Tensor::nchw(static_cast<int>(images.size()), 1, h, w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const GrayImage& img = *images[n];
    if (img.width != w || img.height != h) throw ShapeError("to_batch: images differ in size");
    float* dst = t.sample(static_cast<int>(n));
    for (std::size_t i = 0; i < img.pixels.size(); ++i) dst[i] = img.pixels[i] / 255.0f;
  }
  return t;
}

}  // namespace siamedp
