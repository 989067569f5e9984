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

#include "siamedp/siamese_head.h"
#include "siamedp/tensor.h"

namespace siamedp {

// 8-bit grayscale raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool empty() const { return pixels.empty(); }

  bool operator==(const GrayImage&) const = default;
};

// Binary PGM (P5, maxval 255). Comments in the header are skipped on read.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);

GrayImage flip_horizontal(const GrayImage& image);

// size x size chip whose centre pixel (size / 2, size / 2) is the source
// pixel at round(center). Pixels outside the frame replicate the edge.
GrayImage crop_eye(const GrayImage& image, Vec2 center, int size = 24);

// 1 x 1 x H x W tensor with values scaled to [0, 1].
Tensor to_tensor(const GrayImage& image);

// Stacks equally sized images into an N x 1 x H x W tensor.
Tensor to_batch(const std::vector<const GrayImage*>& images);

}  // namespace siamedp
