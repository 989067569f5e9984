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

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "siamedp/error.h"

namespace siamedp {

// Up to four extents. Rank-4 tensors are interpreted as NCHW.
class Shape {
 public:
  static constexpr int kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<int> dims);
  explicit Shape(std::span<const int> dims);

  int rank() const { return rank_; }
  int operator[](int axis) const { return dims_[axis]; }
  std::size_t numel() const;
  std::vector<int> dims() const { return {dims_.begin(), dims_.begin() + rank_}; }
  std::string str() const;

  bool operator==(const Shape& other) const;

 private:
  std::array<int, kMaxRank> dims_{};
  int rank_ = 0;
};

// Dense row-major buffer with value semantics. T is float for training and
// inference, double for gradient checking.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor nchw(int n, int c, int h, int w, T fill = T(0)) {
    return BasicTensor(Shape{n, c, h, w}, fill);
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return shape_.rank(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // NCHW accessors; valid for rank-4 tensors only.
  int n() const { return shape_[0]; }
  int c() const { return shape_[1]; }
  int h() const { return shape_[2]; }
  int w() const { return shape_[3]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  // Pointer to the first element of sample `n` (rank 4).
  T* sample(int n) { return data_.data() + static_cast<std::size_t>(n) * sample_size(); }
  const T* sample(int n) const { return data_.data() + static_cast<std::size_t>(n) * sample_size(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(shape_[1]) * shape_[2] * shape_[3]; }

  // Copy of samples [begin, begin + count) as a new rank-4 tensor.
  BasicTensor slice(int begin, int count) const;

  BasicTensor reshaped(Shape shape) const;
  void fill(T value);
  void zero() { fill(T(0)); }
  bool all_finite() const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool operator==(const BasicTensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

// Concatenates rank-4 tensors along the batch axis.
template <typename T>
BasicTensor<T> concat_batch(std::span<const BasicTensor<T>> parts);

void require_rank4(const Shape& shape, const char* what);

}  // namespace siamedp
