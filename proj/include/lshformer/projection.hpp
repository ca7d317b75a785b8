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

// Embedding-free word representations.
//
// A token is mapped to a T-bit vector by hashing its character n-grams and
// skip-grams. The only state is a list of T 32-bit per-bit seeds derived from
// one 64-bit global seed, so the "embedding" costs 4*T bytes no matter how many
// distinct words are ever seen.
//
// Hashing scheme (stable across platforms and runs):
//   hash64(bytes, seed): FNV-1a 64 over the UTF-8 bytes, starting from the
//                        FNV offset basis xor seed, then the splitmix64
//                        finalizer.
//   hash64(value, seed): splitmix64 finalizer of (value xor finalize(seed +
//                        golden-ratio constant)).
// For feature f: h = hash64(f, global_seed). For bit t the feature votes +1
// when hash64(h, bit_seeds[t]) is even and -1 when odd. Bit t is set iff the
// vote total is >= 0 (ties set the bit).
//
// Packing: bit t lives in word t / 64 at position t % 64 (little-endian within
// 64-bit words). Tail bits of the last word are always zero.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lshformer {

inline constexpr std::uint64_t kDefaultProjectionSeed = 0x5eedf00dcafe1234ULL;

struct ProjectionConfig {
  std::uint32_t T = 420;
  std::uint32_t max_ngram = 5;
  std::uint32_t skip_distance = 1;
  std::uint64_t global_seed = kDefaultProjectionSeed;
  std::vector<std::uint32_t> bit_seeds;

  // Builds a config whose bit_seeds are derived from global_seed.
  static ProjectionConfig make(std::uint32_t T = 420, std::uint32_t max_ngram = 5,
                               std::uint32_t skip_distance = 1,
                               std::uint64_t global_seed = kDefaultProjectionSeed);

  // Throws Error("invalid-config") if T == 0, max_ngram == 0, or the seeds
  // do not match what make() would derive.
  void validate() const;

  // Hash of every field, used to key shared projection caches.
  std::uint64_t fingerprint() const;

  bool operator==(const ProjectionConfig&) const = default;
};

std::vector<std::uint32_t> derive_bit_seeds(std::uint64_t global_seed, std::uint32_t T);

std::uint64_t hash64(std::string_view bytes, std::uint64_t seed);
std::uint64_t hash64(std::uint64_t value, std::uint64_t seed);

class BitProjection {
 public:
  BitProjection() = default;
  explicit BitProjection(std::size_t bits);

  std::size_t size() const noexcept { return bits_; }
  bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool value) noexcept;
  std::size_t count() const noexcept;
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool operator==(const BitProjection&) const = default;

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

std::size_t hamming_distance(const BitProjection& a, const BitProjection& b);

// N x T bit matrix, one packed row per token.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t bits);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t bits() const noexcept { return bits_; }
  bool test(std::size_t row, std::size_t bit) const noexcept {
    return (words_[row * words_per_row_ + (bit >> 6)] >> (bit & 63)) & 1u;
  }
  void set_row(std::size_t row, const BitProjection& p);
  BitProjection row(std::size_t row) const;

  bool operator==(const BitMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t bits_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

// Multiset of tagged features: "ngram:<chars>" and "skip:<c_i><c_j>".
using FeatureSet = std::vector<std::string>;

// Character n-grams (1..max_ngram) and skip-grams over "#token#". Characters
// are UTF-8 code points. Throws Error("empty-token") for empty or
// all-whitespace tokens.
FeatureSet extract_features(std::string_view token, const ProjectionConfig& config);

BitProjection project_word(std::string_view token, const ProjectionConfig& config);

// Read-through memoization for project_word, keyed by (config fingerprint,
// token). Thread-safe; cached rows are bit-identical to fresh ones.
class ProjectionCache {
 public:
  BitProjection get(std::string_view token, const ProjectionConfig& config);

  // Number of project_word evaluations performed (cache misses).
  std::size_t computed() const noexcept { return computed_.load(); }
  std::size_t size() const;
  void clear();

 private:
  struct Key {
    std::uint64_t fingerprint;
    std::string token;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };

  mutable std::mutex mutex_;
  std::unordered_map<Key, BitProjection, KeyHash> entries_;
  std::atomic<std::size_t> computed_{0};
};

// Row i == project_word(tokens[i]). Empty tokens raise Error("empty-token")
// with the offending index in the detail.
BitMatrix project_sequence(std::span<const std::string> tokens, const ProjectionConfig& config,
                           ProjectionCache* cache = nullptr);

// Parameter bytes of the projection layer: 4 * T.
std::size_t projection_footprint(const ProjectionConfig& config) noexcept;

}  // namespace lshformer
