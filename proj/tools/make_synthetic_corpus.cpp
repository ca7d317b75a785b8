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

// Writes a seeded synthetic train/test corpus in label<TAB>text form.

#include <iostream>

#include <CLI11.hpp>

#include "lshformer/data.hpp"
#include "lshformer/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic classification corpus", "lshformer-synth"};
  std::string train_path, test_path;
  lshformer::SyntheticOptions opts;
  std::size_t test_examples = 400;
  app.add_option("--train", train_path, "Output training TSV")->required();
  app.add_option("--test", test_path, "Output test TSV")->required();
  app.add_option("--classes", opts.classes)->capture_default_str();
  app.add_option("--examples", opts.examples, "Training examples")->capture_default_str();
  app.add_option("--test-examples", test_examples)->capture_default_str();
  app.add_option("--seed", opts.seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    // Train and test share keywords (same seed) and differ in sampled sentences.
    lshformer::SyntheticOptions all = opts;
    all.examples = opts.examples + test_examples;
    auto corpus = lshformer::synthetic_corpus(all);
    lshformer::Dataset train{{}, corpus.labels}, test{{}, corpus.labels};
    for (std::size_t i = 0; i < corpus.examples.size(); ++i)
      (i < opts.examples ? train : test).examples.push_back(std::move(corpus.examples[i]));
    lshformer::write_tsv(train, train_path);
    lshformer::write_tsv(test, test_path);
  } catch (const lshformer::Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
