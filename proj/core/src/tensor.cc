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

#include "siamedp/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace siamedp {

Shape::Shape(std::initializer_list<int> dims) : Shape(std::span<const int>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const int> dims) {
  if (dims.size() > kMaxRank) throw ShapeError("shape rank exceeds 4");
  for (int d : dims) {
    if (d < 0) throw ShapeError("negative extent in shape");
  }
  std::copy(dims.begin(), dims.end(), dims_.begin());
  rank_ = static_cast<int>(dims.size());
}

std::size_t Shape::numel() const {
  if (rank_ == 0) return 0;
  std::size_t n = 1;
  for (int i = 0; i < rank_; ++i) n *= static_cast<std::size_t>(dims_[i]);
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < rank_; ++i) os << (i ? "x" : "") << dims_[i];
  os << ')';
  return os.str();
}

bool Shape::operator==(const Shape& other) const {
  if (rank_ != other.rank_) return false;
  return std::equal(dims_.begin(), dims_.begin() + rank_, other.dims_.begin());
}

void require_rank4(const Shape& shape, const char* what) {
  if (shape.rank() != 4) {
    throw ShapeError(std::string(what) + ": expected an NCHW tensor, got " + shape.str());
  }
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(shape), data_(shape.numel(), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " + shape_.str());
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::slice(int begin, int count) const {
  require_rank4(shape_, "slice");
  if (begin < 0 || count < 0 || begin + count > n()) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for batch " + std::to_string(n()));
  }
  BasicTensor out = nchw(count, c(), h(), w());
  std::copy_n(sample(begin), out.size(), out.data());
  return out;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  if (shape.numel() != shape_.numel()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return BasicTensor(shape, data_);
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
BasicTensor<T> concat_batch(std::span<const BasicTensor<T>> parts) {
  if (parts.empty()) return {};
  const auto& first = parts.front();
  require_rank4(first.shape(), "concat_batch");
  int total = 0;
  for (const auto& p : parts) {
    require_rank4(p.shape(), "concat_batch");
    if (p.c() != first.c() || p.h() != first.h() || p.w() != first.w()) {
      throw ShapeError("concat_batch: mismatched sample shapes " + first.shape().str() + " vs " + p.shape().str());
    }
    total += p.n();
  }
  auto out = BasicTensor<T>::nchw(total, first.c(), first.h(), first.w());
  T* dst = out.data();
  for (const auto& p : parts) dst = std::copy(p.data(), p.data() + p.size(), dst);
  return out;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<float> concat_batch(std::span<const BasicTensor<float>>);
template BasicTensor<double> concat_batch(std::span<const BasicTensor<double>>);

}  // namespace siamedp
