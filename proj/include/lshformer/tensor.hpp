/*
 * Copyright (C) 2026 The lshformer Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "lshformer/error.hpp"

namespace lshformer {

// Dense row-major tensor. Most model code treats it as a matrix whose rows are
// time-steps and whose columns are features.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, T fill = T{})
      : shape(std::move(dims)), data(element_count(shape), fill) {
    for (auto d : shape)
      if (d == 0) throw Error("shape-mismatch", "tensor dimensions must be positive");
  }

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  bool empty() const noexcept { return data.empty(); }
  std::size_t size() const noexcept { return data.size(); }
  std::size_t rows() const noexcept { return shape.empty() ? 0 : shape.front(); }
  std::size_t cols() const noexcept { return shape.empty() ? 0 : data.size() / shape.front(); }

  T* row(std::size_t i) noexcept { return data.data() + i * cols(); }
  const T* row(std::size_t i) const noexcept { return data.data() + i * cols(); }
  std::span<T> row_span(std::size_t i) noexcept { return {row(i), cols()}; }
  std::span<const T> row_span(std::size_t i) const noexcept { return {row(i), cols()}; }

  T& operator()(std::size_t i, std::size_t j) noexcept { return data[i * cols() + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept { return data[i * cols() + j]; }

  void zero() noexcept { std::fill(data.begin(), data.end(), T{}); }
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out;
  out.shape = t.shape;
  out.data.assign(t.data.begin(), t.data.end());
  return out;
}

// One flag per time-step; nonzero means the position holds real content.
using Mask = std::vector<std::uint8_t>;

}  // namespace lshformer
