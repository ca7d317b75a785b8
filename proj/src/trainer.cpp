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

#include "lshformer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "lshformer/error.hpp"

namespace lshformer {
namespace {

constexpr std::size_t kGradientSlots = 8;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return hash64(a, b ^ 0x6a09e667f3bcc909ULL);
}

void add_params(ModelParams<float>& dst, const ModelParams<float>& src) {
  std::vector<const Tensor<float>*> s;
  src.visit([&](const std::string&, const Tensor<float>& t) { s.push_back(&t); });
  std::size_t i = 0;
  dst.visit([&](const std::string&, Tensor<float>& t) {
    for (std::size_t j = 0; j < t.size(); ++j) t.data[j] += s[i]->data[j];
    ++i;
  });
}

void scale_params(ModelParams<float>& p, float factor) {
  p.visit([&](const std::string&, Tensor<float>& t) {
    for (auto& v : t.data) v *= factor;
  });
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error("invalid-config", what); };
  if (!(lr >= 0.0)) fail("lr must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must be in [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must be in [0, 1)");
  if (total_steps == 0 && epochs == 0) fail("need total_steps or epochs");
  if (total_steps != 0 && warmup_steps > total_steps) fail("warmup_steps must not exceed total_steps");
}

nlohmann::ordered_json to_json(const Metrics& m) {
  nlohmann::ordered_json j{{"step", m.step}, {"lr", m.lr}, {"loss", m.train_loss}};
  if (m.eval_accuracy) j["accuracy"] = *m.eval_accuracy;
  j["wall_time"] = m.wall_time;
  return j;
}

double lr_at(std::uint64_t step, const TrainConfig& cfg) {
  if (cfg.total_steps == 0) throw Error("invalid-config", "total_steps must be positive");
  if (step >= cfg.total_steps) return 0.0;
  if (step < cfg.warmup_steps)
    return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  return cfg.lr * static_cast<double>(cfg.total_steps - step) /
         static_cast<double>(cfg.total_steps - cfg.warmup_steps);
}

std::uint64_t planned_steps(std::size_t n, const TrainConfig& cfg) {
  if (cfg.total_steps) return cfg.total_steps;
  const std::uint64_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  return per_epoch * cfg.epochs;
}

template <typename T>
std::size_t predict_class(std::span<const T> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}
template std::size_t predict_class(std::span<const float>);
template std::size_t predict_class(std::span<const double>);

GradientResult batch_gradients(const ModelParams<float>& params, const ModelConfig& config,
                               const Batch& batch, const ForwardOptions& options,
                               ModelParams<float>& grads, bool parallel) {
  const std::size_t n = batch.size();
  if (n == 0) return {};
  const std::size_t slots = std::min(kGradientSlots, n);

  std::vector<ModelParams<float>> slot_grads(slots);
  std::vector<double> slot_loss(slots, 0.0);
  std::vector<std::string> slot_error(slots);

  auto run_slot = [&](std::size_t s) {
    try {
      slot_grads[s] = ModelParams<float>::zeros(config);
      const std::size_t first = s * n / slots, last = (s + 1) * n / slots;
      for (std::size_t i = first; i < last; ++i) {
        ForwardOptions opts = options;
        opts.seed = mix(options.seed, i);
        ForwardCache<float> cache;
        const auto out = model_forward(batch.projections[i], batch.token_masks[i], params, config,
                                       opts, &cache);
        const auto lg = softmax_cross_entropy(std::span<const float>(out.logits), batch.labels[i]);
        slot_loss[s] += lg.loss;
        model_backward(cache, std::span<const float>(lg.grad), params, config, slot_grads[s]);
      }
    } catch (const std::exception& e) {
      slot_error[s] = e.what();
    }
  };

  const auto count = static_cast<std::int64_t>(slots);
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t s = 0; s < count; ++s) run_slot(static_cast<std::size_t>(s));
  } else {
    for (std::size_t s = 0; s < slots; ++s) run_slot(s);
  }
  for (const auto& e : slot_error)
    if (!e.empty()) throw Error("batch-failed", e);

  GradientResult r;
  for (std::size_t s = 0; s < slots; ++s) {
    add_params(grads, slot_grads[s]);
    r.loss_sum += slot_loss[s];
  }
  r.examples = n;
  return r;
}

double clip_global_norm(ModelParams<float>& grads, double max_norm) {
  double sq = 0.0;
  grads.visit([&](const std::string&, const Tensor<float>& t) {
    for (auto v : t.data) sq += static_cast<double>(v) * v;
  });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) scale_params(grads, static_cast<float>(max_norm / norm));
  return norm;
}

TrainResult train(ModelParams<float> params, const ModelConfig& config,
                  const ProjectionConfig& projection, const std::vector<LabeledExample>& train_set,
                  const TrainConfig& train_config, const std::vector<LabeledExample>* eval_set,
                  const MetricsSink& sink) {
  config.validate();
  if (train_set.empty()) throw Error("empty-dataset", "training set is empty");
  for (const auto& ex : train_set)
    if (ex.label >= config.C) throw Error("label-out-of-range", "training label >= C");

  TrainConfig cfg = train_config;
  cfg.total_steps = planned_steps(train_set.size(), cfg);
  cfg.validate();

  const auto start = std::chrono::steady_clock::now();
  ProjectionCache cache;
  std::vector<Batch> eval_batches;
  if (eval_set && !eval_set->empty())
    eval_batches = make_batches(*eval_set, config, projection, cfg.batch_size, std::nullopt, &cache);

  std::vector<std::span<float>> param_spans;
  params.visit([&](const std::string&, Tensor<float>& t) { param_spans.emplace_back(t.data); });

  TrainResult result;
  AdamHyper hyper{cfg.lr, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay};
  double loss_acc = 0.0;
  std::uint64_t loss_steps = 0;
  std::uint64_t step = 0;

  for (std::uint64_t epoch = 0; step < cfg.total_steps; ++epoch) {
    const auto batches = make_batches(train_set, config, projection, cfg.batch_size,
                                      mix(cfg.seed, epoch), &cache);
    for (const auto& batch : batches) {
      if (step >= cfg.total_steps) break;
      ++step;
      auto grads = ModelParams<float>::zeros(config);
      const ForwardOptions options{true, cfg.dropout_p, mix(cfg.seed ^ 0xd5a61266f0c9392cULL, step)};
      const auto g = batch_gradients(params, config, batch, options, grads, cfg.parallel);
      const double loss = g.loss_sum / static_cast<double>(g.examples);
      if (!std::isfinite(loss))
        throw Error("nan-loss", "non-finite loss at step " + std::to_string(step));
      scale_params(grads, 1.0f / static_cast<float>(g.examples));
      clip_global_norm(grads, cfg.clip_norm);

      std::vector<std::span<const float>> grad_spans;
      grads.visit([&](const std::string&, const Tensor<float>& t) { grad_spans.emplace_back(t.data); });
      hyper.lr = lr_at(step, cfg);
      adam_update(param_spans, grad_spans, result.optimizer, hyper);

      loss_acc += loss;
      ++loss_steps;
      const bool record = (cfg.eval_every && step % cfg.eval_every == 0) || step == cfg.total_steps;
      if (record) {
        Metrics m;
        m.step = step;
        m.lr = hyper.lr;
        m.train_loss = loss_acc / static_cast<double>(loss_steps);
        if (!eval_batches.empty()) m.eval_accuracy = evaluate(params, config, eval_batches);
        m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        loss_acc = 0.0;
        loss_steps = 0;
        if (sink) sink(m);
        result.log.push_back(m);
      }
    }
  }
  result.params = std::move(params);
  return result;
}

double evaluate(const ModelParams<float>& params, const ModelConfig& config,
                const std::vector<Batch>& batches) {
  std::size_t total = 0;
  for (const auto& b : batches) total += b.size();
  if (total == 0) throw Error("empty-dataset", "evaluation set is empty");
  std::size_t correct = 0;
  for (const auto& b : batches) {
    const auto n = static_cast<std::int64_t>(b.size());
    std::vector<std::uint8_t> hit(b.size(), 0);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto out = model_forward(b.projections[i], b.token_masks[i], params, config);
      hit[i] = predict_class(std::span<const float>(out.logits)) == b.labels[i];
    }
    for (auto h : hit) correct += h;
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

double evaluate(const ModelParams<float>& params, const ModelConfig& config,
                const ProjectionConfig& projection, const std::vector<LabeledExample>& examples,
                ProjectionCache* cache) {
  if (examples.empty()) throw Error("empty-dataset", "evaluation set is empty");
  return evaluate(params, config, make_batches(examples, config, projection, 256, std::nullopt, cache));
}

}  // namespace lshformer
