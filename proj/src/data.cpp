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

#include "lshformer/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "lshformer/error.hpp"

namespace lshformer {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Dataset parse_dataset(std::istream& in, const std::vector<std::string>* labels) {
  struct Row {
    std::string label;
    std::vector<std::string> tokens;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw Error("malformed-line", "line " + std::to_string(line_no) + ": expected label<TAB>text");
    auto tokens = tokenize(std::string_view(line).substr(tab + 1));
    if (tokens.empty())
      throw Error("malformed-line", "line " + std::to_string(line_no) + ": text has no tokens");
    rows.push_back({line.substr(0, tab), std::move(tokens)});
  }
  if (in.bad()) throw Error("io", "read failure");
  if (rows.empty()) throw Error("empty-dataset", "no examples");

  Dataset ds;
  if (labels) {
    ds.labels = *labels;
  } else {
    std::set<std::string> names;
    for (const auto& r : rows) names.insert(r.label);
    ds.labels.assign(names.begin(), names.end());
  }
  std::map<std::string, std::uint32_t> index;
  for (std::uint32_t i = 0; i < ds.labels.size(); ++i) index.emplace(ds.labels[i], i);
  ds.examples.reserve(rows.size());
  for (auto& r : rows) {
    const auto it = index.find(r.label);
    if (it == index.end()) throw Error("unknown-label", r.label);
    ds.examples.push_back({it->second, std::move(r.tokens)});
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const std::vector<std::string>* labels) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  return parse_dataset(in, labels);
}

void write_tsv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path.string());
  for (const auto& ex : dataset.examples) {
    out << dataset.labels.at(ex.label) << '\t';
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) out << (i ? " " : "") << ex.tokens[i];
    out << '\n';
  }
  if (!out) throw Error("io", "write failure on " + path.string());
}

void encode_example(std::span<const std::string> tokens, const ModelConfig& config,
                    const ProjectionConfig& projection, ProjectionCache* cache, BitMatrix& bits,
                    Mask& mask) {
  if (tokens.empty()) throw Error("empty-input", "example has no tokens");
  const std::size_t n = std::min<std::size_t>(tokens.size(), config.N_max);
  bits = BitMatrix(config.N_max, projection.T);
  mask.assign(config.N_max, 0);
  for (std::size_t i = 0; i < n; ++i) {
    bits.set_row(i, cache ? cache->get(tokens[i], projection) : project_word(tokens[i], projection));
    mask[i] = 1;
  }
}

std::vector<Batch> make_batches(const std::vector<LabeledExample>& examples, const ModelConfig& config,
                                const ProjectionConfig& projection, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed, ProjectionCache* cache) {
  if (examples.empty()) throw Error("empty-dataset", "no examples to batch");
  if (batch_size == 0) throw Error("invalid-config", "batch_size must be positive");
  if (projection.T != config.T) throw Error("invalid-config", "projection T != model T");
  // Checked up front: nothing may throw inside the parallel region below.
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].tokens.empty())
      throw Error("empty-input", "example " + std::to_string(i) + " has no tokens");
    for (const auto& tok : examples[i].tokens)
      if (tok.find_first_not_of(" \t\r\n\f\v") == std::string::npos)
        throw Error("empty-token", "example " + std::to_string(i) + " has an empty token");
  }

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - start);
    Batch b;
    b.projections.resize(count);
    b.token_masks.resize(count);
    b.labels.resize(count);
    const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto& ex = examples[order[start + static_cast<std::size_t>(i)]];
      encode_example(ex.tokens, config, projection, cache, b.projections[i], b.token_masks[i]);
      b.labels[i] = ex.label;
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::uint32_t default_n_max(const std::vector<LabeledExample>& examples, std::uint32_t K) {
  double total = 0.0;
  for (const auto& ex : examples) total += static_cast<double>(ex.tokens.size());
  const double mean = examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
  return round_up_to_multiple(mean <= 16.0 ? 16u : 128u, K);
}

namespace {

std::string random_word(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  static constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> letter(0, kLetters.size() - 1);
  std::string w(len(rng), 'a');
  for (auto& c : w) c = kLetters[letter(rng)];
  return w;
}

}  // namespace

Dataset synthetic_corpus(const SyntheticOptions& options) {
  if (options.classes < 2) throw Error("invalid-config", "synthetic corpus needs >= 2 classes");
  if (options.examples == 0) throw Error("invalid-config", "synthetic corpus needs examples");
  if (options.min_tokens == 0 || options.min_tokens > options.max_tokens)
    throw Error("invalid-config", "bad synthetic sentence length range");

  std::mt19937_64 rng(options.seed ^ 0x73796e7468657469ULL);
  constexpr std::size_t kKeywordsPerClass = 6;
  constexpr std::size_t kFillerWords = 80;

  std::set<std::string> used;
  auto fresh_word = [&](std::size_t lo, std::size_t hi) {
    std::string w;
    do w = random_word(rng, lo, hi);
    while (!used.insert(w).second);
    return w;
  };
  std::vector<std::vector<std::string>> keywords(options.classes);
  for (auto& k : keywords)
    for (std::size_t i = 0; i < kKeywordsPerClass; ++i) k.push_back(fresh_word(5, 8));
  std::vector<std::string> filler;
  for (std::size_t i = 0; i < kFillerWords; ++i) filler.push_back(fresh_word(2, 6));

  Dataset ds;
  for (std::uint32_t c = 0; c < options.classes; ++c) {
    std::string name = std::to_string(c);
    if (name.size() < 2) name.insert(0, 2 - name.size(), '0');
    ds.labels.push_back("class_" + name);
  }

  std::uniform_int_distribution<std::uint32_t> length(options.min_tokens, options.max_tokens);
  std::uniform_int_distribution<std::size_t> pick_filler(0, filler.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_keyword(0, kKeywordsPerClass - 1);
  std::uniform_int_distribution<int> letter(0, 25);
  std::bernoulli_distribution misspell(0.1);
  for (std::size_t i = 0; i < options.examples; ++i) {
    LabeledExample ex;
    ex.label = static_cast<std::uint32_t>(i % options.classes);
    const std::uint32_t n = length(rng);
    for (std::uint32_t t = 0; t < n; ++t) ex.tokens.push_back(filler[pick_filler(rng)]);
    const std::uint32_t signals = std::min<std::uint32_t>(n, 1 + static_cast<std::uint32_t>(rng() % 3));
    std::uniform_int_distribution<std::uint32_t> position(0, n - 1);
    for (std::uint32_t s = 0; s < signals; ++s) {
      std::string w = keywords[ex.label][pick_keyword(rng)];
      if (misspell(rng)) w[rng() % w.size()] = static_cast<char>('a' + letter(rng));
      ex.tokens[position(rng)] = std::move(w);
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace lshformer
