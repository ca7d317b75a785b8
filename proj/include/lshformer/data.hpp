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

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lshformer/model.hpp"
#include "lshformer/projection.hpp"

namespace lshformer {

struct LabeledExample {
  std::uint32_t label = 0;
  std::vector<std::string> tokens;
};

struct Dataset {
  std::vector<LabeledExample> examples;
  std::vector<std::string> labels;  // index -> name, lexicographically sorted
};

// Lowercases ASCII letters and splits on whitespace; empty pieces are dropped.
std::vector<std::string> tokenize(std::string_view text);

// Reads "label<TAB>text" lines. Blank lines are skipped. Labels map to indices
// in lexicographic order unless `labels` is given, in which case that mapping
// is used and unknown labels are errors.
// Errors: "io", "malformed-line" (detail carries the 1-based line number),
// "unknown-label", "empty-dataset".
Dataset parse_dataset(std::istream& in, const std::vector<std::string>* labels = nullptr);
Dataset load_dataset(const std::filesystem::path& path, const std::vector<std::string>* labels = nullptr);

void write_tsv(const Dataset& dataset, const std::filesystem::path& path);

struct Batch {
  std::vector<BitMatrix> projections;  // each N_max x T
  std::vector<Mask> token_masks;       // each N_max
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

// Truncates to N_max tokens, pads the tail with masked all-zero rows.
void encode_example(std::span<const std::string> tokens, const ModelConfig& config,
                    const ProjectionConfig& projection, ProjectionCache* cache, BitMatrix& bits,
                    Mask& mask);

// Shuffles with shuffle_seed (no shuffle when nullopt), then cuts batches of
// batch_size; the last batch may be smaller.
std::vector<Batch> make_batches(const std::vector<LabeledExample>& examples, const ModelConfig& config,
                                const ProjectionConfig& projection, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed,
                                ProjectionCache* cache = nullptr);

// Short-text default (16) when the mean token count is at most 16, else the
// long-text default (128); rounded up to a multiple of K.
std::uint32_t default_n_max(const std::vector<LabeledExample>& examples, std::uint32_t K);

// Seeded synthetic classification corpus. Each class owns a set of keywords;
// sentences mix 1-3 class keywords (with random misspellings) into shared
// filler words. Labels are "class_0" .. "class_{C-1}".
struct SyntheticOptions {
  std::uint32_t classes = 4;
  std::size_t examples = 400;
  std::uint32_t min_tokens = 4;
  std::uint32_t max_tokens = 12;
  std::uint64_t seed = 0;
};
Dataset synthetic_corpus(const SyntheticOptions& options);

}  // namespace lshformer
