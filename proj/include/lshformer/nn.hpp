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

// Differentiable building blocks. Every primitive has a forward that can
// record what its backward needs into a cache struct, and a backward that
// accumulates parameter gradients and produces the input gradient. All are
// templates over the scalar type: the model trains in float, gradient checks
// run the same code in double.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lshformer/op_counter.hpp"
#include "lshformer/tensor.hpp"

namespace lshformer {

using Rng = std::mt19937_64;

inline constexpr double kLayerNormEpsilon = 1e-12;

// ---- linear -----------------------------------------------------------------

template <typename T>
struct Linear {
  Tensor<T> weight;  // in x out
  Tensor<T> bias;    // out

  static Linear zeros(std::size_t in, std::size_t out) {
    return {Tensor<T>({in, out}), Tensor<T>({out})};
  }
  std::size_t in() const noexcept { return weight.rows(); }
  std::size_t out() const noexcept { return weight.cols(); }
};

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Linear<T>& p);

// Accumulates into grad; overwrites *dx when dx is non-null.
template <typename T>
void linear_backward(const Tensor<T>& x, const Linear<T>& p, const Tensor<T>& dy, Linear<T>& grad,
                     Tensor<T>* dx);

// ---- layer norm -------------------------------------------------------------

template <typename T>
struct LayerNorm {
  Tensor<T> gain;
  Tensor<T> bias;

  static LayerNorm identity(std::size_t d) { return {Tensor<T>({d}, T{1}), Tensor<T>({d})}; }
  static LayerNorm zeros(std::size_t d) { return {Tensor<T>({d}), Tensor<T>({d})}; }
};

// (x - mean) / sqrt(var + eps) * gain + bias with 1/d variance.
template <typename T>
std::vector<T> layer_norm(std::span<const T> x, std::span<const T> gain, std::span<const T> bias,
                          T epsilon = T(kLayerNormEpsilon));

template <typename T>
struct LayerNormCache {
  Tensor<T> normalized;
  std::vector<T> inv_std;
};

// Row-wise layer norm over an M x d tensor.
template <typename T>
Tensor<T> layer_norm_forward(const Tensor<T>& x, const LayerNorm<T>& p, LayerNormCache<T>* cache);

template <typename T>
void layer_norm_backward(const LayerNormCache<T>& cache, const LayerNorm<T>& p, const Tensor<T>& dy,
                         LayerNorm<T>& grad, Tensor<T>& dx);

// ---- GELU (tanh approximation) ------------------------------------------------
//   gelu(x) = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))

template <typename T>
T gelu(T x) noexcept;
template <typename T>
T gelu_derivative(T x) noexcept;

template <typename T>
Tensor<T> gelu_forward(const Tensor<T>& x);
// dx = dy * gelu'(x)
template <typename T>
Tensor<T> gelu_backward(const Tensor<T>& x, const Tensor<T>& dy);

// ---- dropout ------------------------------------------------------------------

struct DropoutSpec {
  double p = 0.0;
  Rng* rng = nullptr;  // null disables dropout (inference)

  bool active() const noexcept { return rng != nullptr && p > 0.0; }
};

// Inverted dropout in place. Records the per-element multiplier (0 or
// 1/(1-p)) in *scale. No-op (and scale left empty) when spec is inactive.
template <typename T>
void dropout_forward(std::span<T> x, const DropoutSpec& spec, std::vector<T>* scale);
template <typename T>
void dropout_backward(std::span<T> dy, const std::vector<T>& scale);

// ---- masked max-pool ------------------------------------------------------------

// Per-column maximum over rows whose mask is set. Ties resolve to the lowest
// row index; *argmax receives the winning row per column. Throws
// Error("empty-pool") when no row is unmasked.
template <typename T>
std::vector<T> masked_max_pool(const Tensor<T>& x, std::span<const std::uint8_t> mask,
                               std::vector<std::size_t>* argmax = nullptr);

// dx[argmax[j], j] += dy[j]
template <typename T>
void masked_max_pool_backward(std::span<const T> dy, const std::vector<std::size_t>& argmax,
                              Tensor<T>& dx);

// ---- softmax cross-entropy -------------------------------------------------------

template <typename T>
struct LossAndGrad {
  T loss;
  std::vector<T> grad;
};

// Throws Error("label-out-of-range").
template <typename T>
LossAndGrad<T> softmax_cross_entropy(std::span<const T> logits, std::size_t label);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

// ---- multi-head self-attention -------------------------------------------------

template <typename T>
struct AttentionParams {
  Linear<T> query;
  Linear<T> key;
  Linear<T> value;
  Linear<T> output;
  std::size_t heads = 1;

  static AttentionParams zeros(std::size_t d, std::size_t heads);
  std::size_t dim() const noexcept { return query.out(); }
};

template <typename T>
struct AttentionCache {
  Tensor<T> x, q, k, v, context;
  std::vector<T> probs;       // heads x M x M, after softmax
  std::vector<T> drop_scale;  // dropout multipliers on probs (empty if none)
};

// Which counters attention work is charged to.
struct AttentionOps {
  OpCategory projections = OpCategory::kEncoderProjections;
  OpCategory scores = OpCategory::kEncoderScores;
};

// Scaled dot-product attention over the rows of x. Keys whose mask is zero get
// -inf logits, so their softmax weight is exactly 0. Throws
// Error("empty-attention-window") when every position is masked and
// Error("shape-mismatch") when d is not divisible by heads.
template <typename T>
Tensor<T> attention_forward(const Tensor<T>& x, std::span<const std::uint8_t> mask,
                            const AttentionParams<T>& p, const DropoutSpec& dropout,
                            AttentionCache<T>* cache, AttentionOps ops = {});

template <typename T>
void attention_backward(const AttentionCache<T>& cache, const AttentionParams<T>& p,
                        const Tensor<T>& dy, AttentionParams<T>& grad, Tensor<T>& dx);

// ---- Adam -----------------------------------------------------------------------

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
};

// Bias-corrected Adam with decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
// Moments are allocated on the first call. Throws Error("shape-mismatch") when
// parameter and gradient lists disagree with each other or with the state.
void adam_update(std::span<const std::span<float>> params,
                 std::span<const std::span<const float>> grads, AdamState& state,
                 const AdamHyper& hyper);

}  // namespace lshformer
