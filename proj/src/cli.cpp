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

#include "lshformer/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lshformer/accounting.hpp"
#include "lshformer/data.hpp"
#include "lshformer/error.hpp"
#include "lshformer/model_io.hpp"
#include "lshformer/trainer.hpp"

namespace lshformer {
namespace {

// Raised for bad flag values discovered after parsing; maps to exit code 2.
struct UsageError : Error {
  using Error::Error;
};

struct ModelFlags {
  std::uint32_t T = 420;
  std::uint32_t d = 768;
  std::uint32_t L = 2;
  std::uint32_t H = 12;
  std::uint32_t K = 1;
  std::uint32_t n_max = 0;  // 0: derive from data (train) or N (report)
  std::uint32_t ffn_dim = 0;  // 0: equal to d
  float dropout = 0.1f;
  std::uint32_t max_ngram = 5;
  std::uint32_t skip_distance = 1;
  std::uint64_t projection_seed = kDefaultProjectionSeed;
};

void add_model_flags(CLI::App& cmd, ModelFlags& f) {
  cmd.add_option("--T", f.T, "Projection bits")->capture_default_str();
  cmd.add_option("--d", f.d, "Hidden size")->capture_default_str();
  cmd.add_option("--L", f.L, "Encoder layers")->capture_default_str();
  cmd.add_option("--H", f.H, "Attention heads")->capture_default_str();
  cmd.add_option("--K,--group-factor", f.K, "LPA group factor")->capture_default_str();
  cmd.add_option("--n-max", f.n_max, "Padded sequence length (multiple of K)");
  cmd.add_option("--ffn-dim", f.ffn_dim, "Feed-forward inner size (default: d)");
  cmd.add_option("--dropout", f.dropout, "Dropout probability")->capture_default_str();
  cmd.add_option("--max-ngram", f.max_ngram, "Longest character n-gram")->capture_default_str();
  cmd.add_option("--skip-distance", f.skip_distance, "Skip-gram gap")->capture_default_str();
  cmd.add_option("--projection-seed", f.projection_seed, "Seed of the projection hash");
}

ModelConfig to_model_config(const ModelFlags& f, std::uint32_t n_max, std::uint32_t classes) {
  ModelConfig c;
  c.T = f.T;
  c.d = f.d;
  c.L = f.L;
  c.H = f.H;
  c.K = f.K;
  c.N_max = n_max;
  c.C = classes;
  c.ffn_dim = f.ffn_dim ? f.ffn_dim : f.d;
  c.dropout_p = f.dropout;
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.code(), e.detail());
  }
  return c;
}

ProjectionConfig to_projection(const ModelFlags& f) {
  try {
    return ProjectionConfig::make(f.T, f.max_ngram, f.skip_distance, f.projection_seed);
  } catch (const Error& e) {
    throw UsageError(e.code(), e.detail());
  }
}

void write_error(std::ostream& err, const std::string& code, const std::string& detail) {
  err << nlohmann::ordered_json{{"error", code}, {"detail", detail}}.dump() << '\n';
}

void save_labels(const std::string& model_path, const std::vector<std::string>& labels) {
  std::ofstream out(labels_path(model_path));
  if (!out) throw Error("io", "cannot write " + labels_path(model_path));
  for (const auto& l : labels) out << l << '\n';
}

std::vector<std::string> load_labels(const std::string& model_path, std::uint32_t classes) {
  std::ifstream in(labels_path(model_path));
  if (!in) throw Error("io", "cannot open " + labels_path(model_path));
  std::vector<std::string> labels;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) labels.push_back(line);
  if (labels.size() != classes)
    throw Error("label-mismatch", "label file lists " + std::to_string(labels.size()) +
                                      " classes, model has " + std::to_string(classes));
  return labels;
}

void set_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

}  // namespace

std::string labels_path(const std::string& model_path) { return model_path + ".labels"; }

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Embedding-free LSH projection transformer for text classification", "lshformer"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a label<TAB>text file");
  std::string train_path, eval_path, model_path, metrics_path;
  ModelFlags mflags;
  TrainConfig tcfg;
  std::uint64_t seed = 0;
  int threads = 0;
  add_model_flags(*train_cmd, mflags);
  train_cmd->add_option("--train", train_path, "Training TSV")->required();
  train_cmd->add_option("--model", model_path, "Output model file")->required();
  train_cmd->add_option("--eval", eval_path, "Optional evaluation TSV for periodic accuracy");
  train_cmd->add_option("--metrics", metrics_path, "Metrics NDJSON output (default: stdout)");
  train_cmd->add_option("--lr", tcfg.lr)->capture_default_str();
  train_cmd->add_option("--beta1", tcfg.beta1)->capture_default_str();
  train_cmd->add_option("--beta2", tcfg.beta2)->capture_default_str();
  train_cmd->add_option("--weight-decay", tcfg.weight_decay)->capture_default_str();
  auto* warmup_opt = train_cmd->add_option("--warmup-steps", tcfg.warmup_steps)->capture_default_str();
  train_cmd->add_option("--total-steps", tcfg.total_steps, "0: epochs x batches per epoch");
  train_cmd->add_option("--epochs", tcfg.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", tcfg.batch_size)->capture_default_str();
  train_cmd->add_option("--eval-every", tcfg.eval_every)->capture_default_str();
  train_cmd->add_option("--clip-norm", tcfg.clip_norm)->capture_default_str();
  train_cmd->add_flag("--parallel", tcfg.parallel, "Compute batch gradients with OpenMP");
  train_cmd->add_option("--threads", threads, "OpenMP thread count");
  train_cmd->add_option("--seed", seed, "Seed for init, shuffling and dropout");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Report accuracy of a model on a TSV file");
  eval_cmd->add_option("--model", model_path, "Model file")->required();
  eval_cmd->add_option("--eval", eval_path, "Evaluation TSV")->required();
  eval_cmd->add_option("--threads", threads, "OpenMP thread count");
  eval_cmd->add_option("--seed", seed, "Unused; accepted for uniform scripting");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Classify one text per stdin line");
  predict_cmd->add_option("--model", model_path, "Model file")->required();
  predict_cmd->add_option("--seed", seed, "Unused; accepted for uniform scripting");

  // report
  auto* report_cmd = app.add_subcommand("report", "Print parameter/footprint and FLOP accounting");
  ModelFlags rflags;
  std::uint32_t report_n = 128, report_c = 2;
  std::uint64_t ref_v = 30000, ref_d = 768;
  add_model_flags(*report_cmd, rflags);
  report_cmd->add_option("--N", report_n, "Sequence length for FLOP counts")->capture_default_str();
  report_cmd->add_option("--C", report_c, "Number of classes")->capture_default_str();
  report_cmd->add_option("--V", ref_v, "Reference vocabulary size")->capture_default_str();
  report_cmd->add_option("--ref-d", ref_d, "Reference embedding size")->capture_default_str();
  report_cmd->add_option("--seed", seed, "Unused; accepted for uniform scripting");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    write_error(err, "usage", e.what());
    return 2;
  }

  try {
    if (*report_cmd) {
      const std::uint32_t n_max = rflags.n_max ? rflags.n_max : report_n;
      const ModelConfig config = to_model_config(rflags, n_max, report_c);
      if (report_n == 0 || report_n % config.K != 0 || report_n > n_max)
        throw UsageError("invalid-config", "--N must be a positive multiple of K and <= --n-max");
      ModelConfig k1 = config;
      k1.K = 1;
      const auto footprint = count_params(config, ref_v, ref_d);
      const auto flops = count_flops(config, report_n);
      const auto flops_k1 = count_flops(k1, report_n);
      const auto cmp = footprint_comparison(config.T, ref_v, ref_d);
      nlohmann::ordered_json j = to_json(footprint);
      const nlohmann::ordered_json flop_json = to_json(flops);
      for (const auto& [key, value] : flop_json.items()) j[key] = value;
      j["embedding_to_projection_ratio"] = cmp.ratio;
      j["encoder_attention_scores_k1"] = flops_k1.encoder_attention_scores;
      j["encoder_score_reduction_vs_k1"] =
          static_cast<double>(flops_k1.encoder_attention_scores) /
          static_cast<double>(flops.encoder_attention_scores);
      out << j.dump() << '\n';
      return 0;
    }

    if (*train_cmd) {
      set_threads(threads);
      const Dataset train_ds = load_dataset(train_path);
      std::optional<Dataset> eval_ds;
      if (!eval_path.empty()) eval_ds = load_dataset(eval_path, &train_ds.labels);

      const std::uint32_t n_max = mflags.n_max ? mflags.n_max : default_n_max(train_ds.examples, mflags.K);
      const auto classes = static_cast<std::uint32_t>(std::max<std::size_t>(train_ds.labels.size(), 2));
      const ModelConfig config = to_model_config(mflags, n_max, classes);
      const ProjectionConfig projection = to_projection(mflags);

      tcfg.seed = seed;
      tcfg.dropout_p = mflags.dropout;
      const std::uint64_t steps = planned_steps(train_ds.examples.size(), tcfg);
      if (warmup_opt->count() == 0 && tcfg.warmup_steps > steps)
        tcfg.warmup_steps = std::max<std::uint64_t>(1, steps / 10);
      try {
        TrainConfig check = tcfg;
        check.total_steps = steps;
        check.validate();
      } catch (const Error& e) {
        throw UsageError(e.code(), e.detail());
      }

      std::ofstream metrics_file;
      if (!metrics_path.empty()) {
        metrics_file.open(metrics_path);
        if (!metrics_file) throw Error("io", "cannot write " + metrics_path);
      }
      std::ostream& metrics = metrics_path.empty() ? out : metrics_file;
      auto result = train(init_params(config, seed), config, projection, train_ds.examples, tcfg,
                          eval_ds ? &eval_ds->examples : nullptr, [&](const Metrics& m) {
                            metrics << to_json(m).dump() << '\n';
                            metrics.flush();
                          });
      save_model(model_path, config, projection, result.params);
      save_labels(model_path, train_ds.labels);
      return 0;
    }

    if (*eval_cmd) {
      set_threads(threads);
      const LoadedModel model = load_model(model_path);
      const auto labels = load_labels(model_path, model.config.C);
      const Dataset ds = load_dataset(eval_path, &labels);
      const double acc = evaluate(model.params, model.config, model.projection, ds.examples);
      out << nlohmann::ordered_json{{"accuracy", acc}, {"examples", ds.examples.size()}}.dump() << '\n';
      return 0;
    }

    if (*predict_cmd) {
      const LoadedModel model = load_model(model_path);
      const auto labels = load_labels(model_path, model.config.C);
      ProjectionCache cache;
      std::size_t line_no = 0;
      for (std::string line; std::getline(in, line);) {
        ++line_no;
        const auto tokens = tokenize(line);
        if (tokens.empty()) {
          out << nlohmann::ordered_json{{"error", "empty-input"}, {"line", line_no}}.dump() << '\n';
          continue;
        }
        BitMatrix bits;
        Mask mask;
        encode_example(tokens, model.config, model.projection, &cache, bits, mask);
        const auto output = model_forward(bits, mask, model.params, model.config);
        const auto probs = softmax(std::span<const float>(output.logits));
        const auto best = predict_class(std::span<const float>(output.logits));
        out << labels[best] << '\t' << std::fixed << std::setprecision(6) << probs[best]
            << std::defaultfloat << '\n';
      }
      return 0;
    }
  } catch (const UsageError& e) {
    write_error(err, e.code(), e.detail());
    return 2;
  } catch (const Error& e) {
    write_error(err, e.code(), e.detail());
    return 1;
  } catch (const std::exception& e) {
    write_error(err, "internal", e.what());
    return 1;
  }
  return 2;
}

}  // namespace lshformer
