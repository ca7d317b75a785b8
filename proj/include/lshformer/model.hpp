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

// The classification network:
//
//   T-bit projections --bipolar scale + linear--> N x d
//     --LPA (K > 1): per group of K rows, self-attention + residual +
//       layer-norm, then masked max-pool--> N/K x d
//     --+ learned group position embeddings--> L encoder blocks
//     --masked max-pool over groups--> d --linear--> C logits
//
// Encoder blocks are post-norm: LN(x + attn(x)), then LN(h + W2 gelu(W1 h)).
// With K == 1 the LPA stage is skipped entirely and holds no parameters.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lshformer/nn.hpp"
#include "lshformer/projection.hpp"
#include "lshformer/tensor.hpp"

namespace lshformer {

struct ModelConfig {
  std::uint32_t T = 420;
  std::uint32_t d = 768;
  std::uint32_t L = 2;
  std::uint32_t H = 12;
  std::uint32_t K = 1;
  std::uint32_t N_max = 128;
  std::uint32_t C = 2;
  std::uint32_t ffn_dim = 768;
  float dropout_p = 0.1f;

  std::uint32_t max_groups() const noexcept { return N_max / K; }
  bool has_lpa() const noexcept { return K > 1; }

  // Throws Error("invalid-config") naming the violated constraint.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Rounds n up to the next multiple of k.
std::uint32_t round_up_to_multiple(std::uint32_t n, std::uint32_t k);

template <typename T>
struct EncoderLayer {
  AttentionParams<T> attention;
  LayerNorm<T> attention_norm;
  Linear<T> ffn_in;
  Linear<T> ffn_out;
  LayerNorm<T> ffn_norm;
};

template <typename T>
struct ModelParams {
  Linear<T> input;                  // T -> d
  AttentionParams<T> lpa_attention; // empty when K == 1
  LayerNorm<T> lpa_norm;            // empty when K == 1
  Tensor<T> pos_embed;              // max_groups x d
  std::vector<EncoderLayer<T>> encoder;
  Linear<T> head;                   // d -> C

  // Zero-filled parameters (layer-norm gains included) shaped for config.
  static ModelParams zeros(const ModelConfig& config);

  // Calls fn(name, tensor) for every parameter tensor in the fixed
  // serialization order.
  template <typename Fn>
  void visit(Fn&& fn) {
    visit_impl(*this, fn);
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    visit_impl(*this, fn);
  }

  std::size_t parameter_count() const;

 private:
  template <typename Self, typename Fn>
  static void visit_impl(Self& self, Fn& fn) {
    auto linear = [&](const std::string& name, auto& l) {
      fn(name + ".weight", l.weight);
      fn(name + ".bias", l.bias);
    };
    auto attention = [&](const std::string& name, auto& a) {
      linear(name + ".query", a.query);
      linear(name + ".key", a.key);
      linear(name + ".value", a.value);
      linear(name + ".output", a.output);
    };
    auto norm = [&](const std::string& name, auto& n) {
      fn(name + ".gain", n.gain);
      fn(name + ".bias", n.bias);
    };
    linear("input", self.input);
    if (!self.lpa_attention.query.weight.empty()) {
      attention("lpa.attention", self.lpa_attention);
      norm("lpa.norm", self.lpa_norm);
    }
    fn(std::string("pos_embed"), self.pos_embed);
    for (std::size_t l = 0; l < self.encoder.size(); ++l) {
      const std::string prefix = "encoder." + std::to_string(l);
      attention(prefix + ".attention", self.encoder[l].attention);
      norm(prefix + ".attention_norm", self.encoder[l].attention_norm);
      linear(prefix + ".ffn_in", self.encoder[l].ffn_in);
      linear(prefix + ".ffn_out", self.encoder[l].ffn_out);
      norm(prefix + ".ffn_norm", self.encoder[l].ffn_norm);
    }
    linear("head", self.head);
  }
};

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params, const ModelConfig& config);

// Truncated-normal (std 0.02, cut at 2 std) weights and position embeddings,
// zero biases, unit layer-norm gains. Deterministic in seed.
ModelParams<float> init_params(const ModelConfig& config, std::uint64_t seed);

struct ForwardOptions {
  bool training = false;
  double dropout_p = 0.0;
  std::uint64_t seed = 0;  // dropout stream when training
};

template <typename T>
struct ModelOutput {
  std::vector<T> logits;
  Tensor<T> groups;  // LPA output, max_groups x d
  Mask group_mask;
};

template <typename T>
struct LpaGroupCache {
  bool live = false;
  AttentionCache<T> attention;
  std::vector<T> attention_drop;
  LayerNormCache<T> norm;
  std::vector<std::size_t> argmax;
};

template <typename T>
struct EncoderLayerCache {
  Tensor<T> input;
  AttentionCache<T> attention;
  std::vector<T> attention_drop;
  LayerNormCache<T> attention_norm;
  Tensor<T> hidden;    // output of attention_norm
  Tensor<T> ffn_pre;   // ffn_in output, before GELU
  Tensor<T> ffn_act;   // after GELU
  std::vector<T> ffn_drop;
  LayerNormCache<T> ffn_norm;
};

template <typename T>
struct ForwardCache {
  Tensor<T> bipolar;  // N_max x T
  Mask token_mask;
  std::vector<LpaGroupCache<T>> groups;
  Mask group_mask;
  std::vector<T> input_drop;
  std::vector<EncoderLayerCache<T>> layers;
  std::vector<std::size_t> pool_argmax;
  Tensor<T> pooled;  // 1 x d
};

// Maps bits {0,1} to {-1/sqrt(T), +1/sqrt(T)} and applies the input linear.
template <typename T>
Tensor<T> embed_projections(const BitMatrix& projections, const ModelParams<T>& params,
                            const ModelConfig& config, Tensor<T>* bipolar = nullptr);

template <typename T>
struct LpaOutput {
  Tensor<T> groups;  // max_groups x d
  Mask group_mask;
};

// Compresses N_max rows into N_max / K group vectors. K == 1 returns the
// input unchanged. Fully padded groups yield zero rows with a cleared mask.
template <typename T>
LpaOutput<T> lpa_forward(const Tensor<T>& embedded, std::span<const std::uint8_t> token_mask,
                         const ModelParams<T>& params, const ModelConfig& config,
                         const DropoutSpec& dropout, std::vector<LpaGroupCache<T>>* cache = nullptr);

// Throws Error("empty-input") when no token is unmasked and
// Error("shape-mismatch") when inputs disagree with config.
template <typename T>
ModelOutput<T> model_forward(const BitMatrix& projections, std::span<const std::uint8_t> token_mask,
                             const ModelParams<T>& params, const ModelConfig& config,
                             const ForwardOptions& options = {}, ForwardCache<T>* cache = nullptr);

// Accumulates d(loss)/d(params) into grads given d(loss)/d(logits).
template <typename T>
void model_backward(const ForwardCache<T>& cache, std::span<const T> dlogits,
                    const ModelParams<T>& params, const ModelConfig& config, ModelParams<T>& grads);

}  // namespace lshformer
