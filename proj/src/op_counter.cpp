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

#include "lshformer/op_counter.hpp"

#include <numeric>

namespace lshformer {
namespace {
thread_local OpCounter* tls_counter = nullptr;
thread_local OpCategory tls_category = OpCategory::kSecondary;
}  // namespace

std::uint64_t OpCounter::total() const {
  return std::accumulate(macs.begin(), macs.end(), std::uint64_t{0});
}

namespace ops {

ScopedCounter::ScopedCounter(OpCounter& counter) : previous_(tls_counter) { tls_counter = &counter; }
ScopedCounter::~ScopedCounter() { tls_counter = previous_; }

ScopedCategory::ScopedCategory(OpCategory category) : previous_(tls_category) {
  tls_category = category;
}
ScopedCategory::~ScopedCategory() { tls_category = previous_; }

OpCounter* current() noexcept { return tls_counter; }

void add(std::uint64_t count) noexcept { add(tls_category, count); }

void add(OpCategory category, std::uint64_t count) noexcept {
  if (tls_counter) tls_counter->macs[static_cast<std::size_t>(category)] += count;
}

}  // namespace ops
}  // namespace lshformer
