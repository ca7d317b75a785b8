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
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "lshformer/data.hpp"
#include "lshformer/model.hpp"
#include "lshformer/nn.hpp"

namespace lshformer {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  std::uint64_t warmup_steps = 10000;
  std::uint64_t total_steps = 0;  // 0: epochs * batches per epoch
  std::uint32_t epochs = 5;
  std::size_t batch_size = 256;
  double dropout_p = 0.1;
  std::uint64_t eval_every = 100;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;  // global gradient norm cap; <= 0 disables
  bool parallel = false;   // OpenMP over examples; same result as serial

  // Throws Error("invalid-config").
  void validate() const;
};

struct Metrics {
  std::uint64_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean over steps since the previous record
  std::optional<double> eval_accuracy;
  double wall_time = 0.0;   // seconds since training started
};

nlohmann::ordered_json to_json(const Metrics& m);

// Linear warmup to cfg.lr at warmup_steps, then linear decay to 0 at
// total_steps. Requires total_steps > 0.
double lr_at(std::uint64_t step, const TrainConfig& cfg);

// Total optimizer steps train() will run for a dataset of n examples.
std::uint64_t planned_steps(std::size_t n, const TrainConfig& cfg);

// Argmax with ties to the lowest index.
template <typename T>
std::size_t predict_class(std::span<const T> logits);

struct GradientResult {
  double loss_sum = 0.0;
  std::size_t examples = 0;
};

// Accumulates the summed per-example gradients of a batch into grads (which
// must be zero-initialized). The batch is split into a fixed number of slots
// that are reduced in order, so the parallel path is bit-identical to the
// serial one regardless of thread count. Dropout for example i uses a stream
// derived from (options.seed, i).
GradientResult batch_gradients(const ModelParams<float>& params, const ModelConfig& config,
                               const Batch& batch, const ForwardOptions& options,
                               ModelParams<float>& grads, bool parallel);

// Scales every gradient so the global L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_global_norm(ModelParams<float>& grads, double max_norm);

using MetricsSink = std::function<void(const Metrics&)>;

struct TrainResult {
  ModelParams<float> params;
  std::vector<Metrics> log;
  AdamState optimizer;
};

// Throws Error("nan-loss") if a batch loss is not finite.
TrainResult train(ModelParams<float> params, const ModelConfig& config,
                  const ProjectionConfig& projection, const std::vector<LabeledExample>& train_set,
                  const TrainConfig& train_config,
                  const std::vector<LabeledExample>* eval_set = nullptr,
                  const MetricsSink& sink = {});

// Accuracy with dropout disabled. Throws Error("empty-dataset").
double evaluate(const ModelParams<float>& params, const ModelConfig& config,
                const std::vector<Batch>& batches);
double evaluate(const ModelParams<float>& params, const ModelConfig& config,
                const ProjectionConfig& projection, const std::vector<LabeledExample>& examples,
                ProjectionCache* cache = nullptr);

}  // namespace lshformer
