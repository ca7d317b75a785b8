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

// Operation counters for compute accounting. A forward pass run with an
// active OpCounter on the current thread reports how many multiply-accumulates
// each subsystem executed, which tests compare against the closed-form FLOP
// report.

#include <array>
#include <cstdint>

namespace lshformer {

enum class OpCategory : std::size_t {
  kInputLinear,
  kLpaProjections,
  kLpaScores,
  kEncoderProjections,
  kEncoderScores,
  kFfn,
  kHead,
  kSecondary,  // softmax, layer-norm and GELU element operations
  kCount,
};

struct OpCounter {
  std::array<std::uint64_t, static_cast<std::size_t>(OpCategory::kCount)> macs{};
  std::uint64_t lpa_attention_calls = 0;
  std::uint64_t encoder_attention_calls = 0;

  std::uint64_t operator[](OpCategory c) const { return macs[static_cast<std::size_t>(c)]; }
  std::uint64_t total() const;
};

namespace ops {

// Installs `counter` as the current thread's sink until destruction.
class ScopedCounter {
 public:
  explicit ScopedCounter(OpCounter& counter);
  ~ScopedCounter();
  ScopedCounter(const ScopedCounter&) = delete;
  ScopedCounter& operator=(const ScopedCounter&) = delete;

 private:
  OpCounter* previous_;
};

// Attributes counts recorded on this thread to `category` until destruction.
class ScopedCategory {
 public:
  explicit ScopedCategory(OpCategory category);
  ~ScopedCategory();
  ScopedCategory(const ScopedCategory&) = delete;
  ScopedCategory& operator=(const ScopedCategory&) = delete;

 private:
  OpCategory previous_;
};

OpCounter* current() noexcept;
void add(std::uint64_t count) noexcept;
void add(OpCategory category, std::uint64_t count) noexcept;

}  // namespace ops
}  // namespace lshformer
