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

#include "lshformer/projection.hpp"

#include <bit>
#include <cmath>

#include "lshformer/error.hpp"

namespace lshformer {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t finalize(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\n\r\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

// Splits UTF-8 into code points. Malformed sequences degrade to single bytes.
std::vector<std::string_view> code_points(std::string_view s) {
  std::vector<std::string_view> out;
  out.reserve(s.size() + 2);
  std::size_t i = 0;
  while (i < s.size()) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead < 0xF8) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    if (lead >= 0xF8 || i + len > s.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace

std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = kFnvOffset ^ seed;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return finalize(h);
}

std::uint64_t hash64(std::uint64_t value, std::uint64_t seed) {
  return finalize(value ^ finalize(seed + kGolden));
}

std::vector<std::uint32_t> derive_bit_seeds(std::uint64_t global_seed, std::uint32_t T) {
  std::vector<std::uint32_t> seeds(T);
  std::uint64_t state = global_seed;
  for (auto& s : seeds) {
    state += kGolden;
    s = static_cast<std::uint32_t>(finalize(state) >> 32);
  }
  return seeds;
}

ProjectionConfig ProjectionConfig::make(std::uint32_t T, std::uint32_t max_ngram,
                                        std::uint32_t skip_distance, std::uint64_t global_seed) {
  ProjectionConfig c;
  c.T = T;
  c.max_ngram = max_ngram;
  c.skip_distance = skip_distance;
  c.global_seed = global_seed;
  c.bit_seeds = derive_bit_seeds(global_seed, T);
  c.validate();
  return c;
}

void ProjectionConfig::validate() const {
  if (T == 0) throw Error("invalid-config", "projection T must be positive");
  if (max_ngram == 0) throw Error("invalid-config", "max_ngram must be positive");
  if (bit_seeds.size() != T) throw Error("invalid-config", "bit_seeds length != T");
  if (bit_seeds != derive_bit_seeds(global_seed, T))
    throw Error("invalid-config", "bit_seeds do not derive from global_seed");
}

std::uint64_t ProjectionConfig::fingerprint() const {
  std::uint64_t h = hash64(std::uint64_t{T}, global_seed);
  h = hash64(h, max_ngram);
  h = hash64(h, skip_distance);
  for (auto s : bit_seeds) h = hash64(h, s);
  return h;
}

BitProjection::BitProjection(std::size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}

void BitProjection::set(std::size_t i, bool value) noexcept {
  const std::uint64_t mask = std::uint64_t{1} << (i & 63);
  if (value) words_[i >> 6] |= mask;
  else words_[i >> 6] &= ~mask;
}

std::size_t BitProjection::count() const noexcept {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::size_t hamming_distance(const BitProjection& a, const BitProjection& b) {
  if (a.size() != b.size()) throw Error("shape-mismatch", "projections differ in width");
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.words().size(); ++i)
    n += static_cast<std::size_t>(std::popcount(a.words()[i] ^ b.words()[i]));
  return n;
}

BitMatrix::BitMatrix(std::size_t rows, std::size_t bits)
    : rows_(rows), bits_(bits), words_per_row_((bits + 63) / 64), words_(rows * words_per_row_, 0) {}

void BitMatrix::set_row(std::size_t row, const BitProjection& p) {
  if (p.size() != bits_) throw Error("shape-mismatch", "projection width != matrix width");
  std::copy(p.words().begin(), p.words().end(), words_.begin() + row * words_per_row_);
}

BitProjection BitMatrix::row(std::size_t row) const {
  BitProjection p(bits_);
  for (std::size_t t = 0; t < bits_; ++t) p.set(t, test(row, t));
  return p;
}

FeatureSet extract_features(std::string_view token, const ProjectionConfig& config) {
  const auto trimmed = trim(token);
  if (trimmed.empty()) throw Error("empty-token", "token is empty");

  std::vector<std::string_view> chars;
  const auto inner = code_points(trimmed);
  chars.reserve(inner.size() + 2);
  chars.push_back("#");
  chars.insert(chars.end(), inner.begin(), inner.end());
  chars.push_back("#");
  const std::size_t len = chars.size();

  FeatureSet out;
  for (std::size_t n = 1; n <= config.max_ngram && n <= len; ++n) {
    for (std::size_t i = 0; i + n <= len; ++i) {
      std::string f = "ngram:";
      for (std::size_t k = 0; k < n; ++k) f += chars[i + k];
      out.push_back(std::move(f));
    }
  }
  const std::size_t gap = std::size_t{config.skip_distance} + 1;
  for (std::size_t i = 0; i + gap < len; ++i) {
    std::string f = "skip:";
    f += chars[i];
    f += chars[i + gap];
    out.push_back(std::move(f));
  }
  return out;
}

BitProjection project_word(std::string_view token, const ProjectionConfig& config) {
  const auto features = extract_features(token, config);
  std::vector<std::uint64_t> hashes;
  hashes.reserve(features.size());
  for (const auto& f : features) hashes.push_back(hash64(f, config.global_seed));

  BitProjection p(config.T);
  for (std::uint32_t t = 0; t < config.T; ++t) {
    const std::uint64_t seed = config.bit_seeds[t];
    long votes = 0;
    for (auto h : hashes) votes += (hash64(h, seed) & 1u) ? -1 : 1;
    p.set(t, votes >= 0);
  }
  return p;
}

std::size_t ProjectionCache::KeyHash::operator()(const Key& k) const noexcept {
  return static_cast<std::size_t>(hash64(k.token, k.fingerprint));
}

BitProjection ProjectionCache::get(std::string_view token, const ProjectionConfig& config) {
  Key key{config.fingerprint(), std::string(token)};
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  auto p = project_word(token, config);
  ++computed_;
  std::lock_guard lock(mutex_);
  // A concurrent miss on the same key may already have inserted an identical row.
  return entries_.try_emplace(std::move(key), std::move(p)).first->second;
}

std::size_t ProjectionCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void ProjectionCache::clear() {
  std::lock_guard lock(mutex_);
  entries_.clear();
  computed_ = 0;
}

BitMatrix project_sequence(std::span<const std::string> tokens, const ProjectionConfig& config,
                           ProjectionCache* cache) {
  if (tokens.empty()) throw Error("empty-input", "token sequence is empty");
  BitMatrix m(tokens.size(), config.T);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (trim(tokens[i]).empty())
      throw Error("empty-token", "token at index " + std::to_string(i) + " is empty");
    m.set_row(i, cache ? cache->get(tokens[i], config) : project_word(tokens[i], config));
  }
  return m;
}

std::size_t projection_footprint(const ProjectionConfig& config) noexcept {
  return std::size_t{4} * config.T;
}

}  // namespace lshformer
