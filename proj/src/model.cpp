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

#include "lshformer/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lshformer/error.hpp"
#include "lshformer/op_counter.hpp"

namespace lshformer {
namespace {

constexpr double kInitStd = 0.02;

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t first, std::size_t count) {
  Tensor<T> out({count, x.cols()});
  std::copy(x.row(first), x.row(first) + count * x.cols(), out.data.begin());
  return out;
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

bool any_set(std::span<const std::uint8_t> mask) {
  return std::any_of(mask.begin(), mask.end(), [](std::uint8_t b) { return b != 0; });
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error("invalid-config", what); };
  if (T == 0) fail("T must be positive");
  if (d == 0) fail("d must be positive");
  if (L < 1) fail("L must be >= 1");
  if (H == 0 || d % H != 0) fail("d must be divisible by H");
  if (K == 0) fail("K must be positive");
  if (N_max == 0 || N_max % K != 0) fail("N_max must be a positive multiple of K");
  if (C < 2) fail("C must be >= 2");
  if (ffn_dim == 0) fail("ffn_dim must be positive");
  if (!(dropout_p >= 0.0f && dropout_p < 1.0f)) fail("dropout_p must be in [0, 1)");
}

std::uint32_t round_up_to_multiple(std::uint32_t n, std::uint32_t k) {
  if (k == 0) throw Error("invalid-config", "cannot round to a multiple of 0");
  return (n + k - 1) / k * k;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.input = Linear<T>::zeros(config.T, config.d);
  if (config.has_lpa()) {
    p.lpa_attention = AttentionParams<T>::zeros(config.d, config.H);
    p.lpa_norm = LayerNorm<T>::zeros(config.d);
  }
  p.pos_embed = Tensor<T>({config.max_groups(), config.d});
  p.encoder.resize(config.L);
  for (auto& layer : p.encoder) {
    layer.attention = AttentionParams<T>::zeros(config.d, config.H);
    layer.attention_norm = LayerNorm<T>::zeros(config.d);
    layer.ffn_in = Linear<T>::zeros(config.d, config.ffn_dim);
    layer.ffn_out = Linear<T>::zeros(config.ffn_dim, config.d);
    layer.ffn_norm = LayerNorm<T>::zeros(config.d);
  }
  p.head = Linear<T>::zeros(config.d, config.C);
  return p;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Tensor<T>& t) { n += t.size(); });
  return n;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params, const ModelConfig& config) {
  auto out = ModelParams<To>::zeros(config);
  std::vector<const Tensor<From>*> src;
  params.visit([&](const std::string&, const Tensor<From>& t) { src.push_back(&t); });
  std::size_t i = 0;
  out.visit([&](const std::string& name, Tensor<To>& t) {
    if (i >= src.size() || src[i]->shape != t.shape)
      throw Error("shape-mismatch", "parameter " + name + " does not match config");
    t.data.assign(src[i]->data.begin(), src[i]->data.end());
    ++i;
  });
  if (i != src.size()) throw Error("shape-mismatch", "parameter count does not match config");
  return out;
}

ModelParams<float> init_params(const ModelConfig& config, std::uint64_t seed) {
  auto p = ModelParams<float>::zeros(config);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto truncated = [&](Tensor<float>& t) {
    for (auto& v : t.data) {
      double z;
      do z = normal(rng);
      while (std::abs(z) > 2.0);
      v = static_cast<float>(z * kInitStd);
    }
  };
  p.visit([&](const std::string& name, Tensor<float>& t) {
    if (name.ends_with(".weight") || name == "pos_embed") truncated(t);
    else if (name.ends_with(".gain")) std::fill(t.data.begin(), t.data.end(), 1.0f);
  });
  return p;
}

template <typename T>
Tensor<T> embed_projections(const BitMatrix& projections, const ModelParams<T>& params,
                            const ModelConfig& config, Tensor<T>* bipolar) {
  if (projections.bits() != config.T || projections.rows() == 0)
    throw Error("shape-mismatch", "projection matrix width != T");
  const T scale = T(1) / std::sqrt(static_cast<T>(config.T));
  Tensor<T> x({projections.rows(), config.T});
  for (std::size_t i = 0; i < projections.rows(); ++i)
    for (std::size_t t = 0; t < config.T; ++t) x(i, t) = projections.test(i, t) ? scale : -scale;
  ops::ScopedCategory cat(OpCategory::kInputLinear);
  auto out = linear_forward(x, params.input);
  if (bipolar) *bipolar = std::move(x);
  return out;
}

template <typename T>
LpaOutput<T> lpa_forward(const Tensor<T>& embedded, std::span<const std::uint8_t> token_mask,
                         const ModelParams<T>& params, const ModelConfig& config,
                         const DropoutSpec& dropout, std::vector<LpaGroupCache<T>>* cache) {
  if (embedded.rows() != config.N_max || token_mask.size() != config.N_max)
    throw Error("shape-mismatch", "LPA input must have N_max rows");
  if (!config.has_lpa()) return {embedded, Mask(token_mask.begin(), token_mask.end())};

  const std::size_t K = config.K, groups = config.max_groups(), d = config.d;
  LpaOutput<T> out{Tensor<T>({groups, d}), Mask(groups, 0)};
  if (cache) cache->assign(groups, {});
  const AttentionOps lpa_ops{OpCategory::kLpaProjections, OpCategory::kLpaScores};
  for (std::size_t g = 0; g < groups; ++g) {
    const auto gmask = token_mask.subspan(g * K, K);
    if (!any_set(gmask)) continue;
    LpaGroupCache<T> local;
    LpaGroupCache<T>& c = cache ? (*cache)[g] : local;
    c.live = true;
    const Tensor<T> rows = slice_rows(embedded, g * K, K);
    if (auto* counter = ops::current()) ++counter->lpa_attention_calls;
    Tensor<T> attended = attention_forward(rows, gmask, params.lpa_attention, dropout,
                                           cache ? &c.attention : nullptr, lpa_ops);
    dropout_forward(std::span<T>(attended.data), dropout, &c.attention_drop);
    add_into(attended, rows);
    const Tensor<T> normed = layer_norm_forward(attended, params.lpa_norm, cache ? &c.norm : nullptr);
    const auto pooled = masked_max_pool(normed, gmask, &c.argmax);
    std::copy(pooled.begin(), pooled.end(), out.groups.row(g));
    out.group_mask[g] = 1;
  }
  return out;
}

template <typename T>
ModelOutput<T> model_forward(const BitMatrix& projections, std::span<const std::uint8_t> token_mask,
                             const ModelParams<T>& params, const ModelConfig& config,
                             const ForwardOptions& options, ForwardCache<T>* cache) {
  if (projections.rows() != config.N_max || token_mask.size() != config.N_max)
    throw Error("shape-mismatch", "inputs must have N_max rows");
  if (!any_set(token_mask)) throw Error("empty-input", "every token is masked");

  Rng rng(options.seed);
  const DropoutSpec dropout{options.dropout_p, options.training ? &rng : nullptr};

  Tensor<T> embedded = embed_projections(projections, params, config, cache ? &cache->bipolar : nullptr);
  LpaOutput<T> lpa = lpa_forward(embedded, token_mask, params, config, dropout,
                                 cache ? &cache->groups : nullptr);

  Tensor<T> x = lpa.groups;
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] += params.pos_embed.data[i];
  std::vector<T> input_drop;
  dropout_forward(std::span<T>(x.data), dropout, &input_drop);

  std::vector<EncoderLayerCache<T>> layers(cache ? config.L : 0);
  for (std::size_t l = 0; l < config.L; ++l) {
    const auto& p = params.encoder[l];
    EncoderLayerCache<T> local;
    EncoderLayerCache<T>& c = cache ? layers[l] : local;
    if (auto* counter = ops::current()) ++counter->encoder_attention_calls;
    Tensor<T> attended = attention_forward(x, lpa.group_mask, p.attention, dropout,
                                           cache ? &c.attention : nullptr);
    dropout_forward(std::span<T>(attended.data), dropout, &c.attention_drop);
    add_into(attended, x);
    Tensor<T> hidden = layer_norm_forward(attended, p.attention_norm, cache ? &c.attention_norm : nullptr);

    Tensor<T> pre, act, ffn;
    {
      ops::ScopedCategory cat(OpCategory::kFfn);
      pre = linear_forward(hidden, p.ffn_in);
      act = gelu_forward(pre);
      ffn = linear_forward(act, p.ffn_out);
    }
    dropout_forward(std::span<T>(ffn.data), dropout, &c.ffn_drop);
    add_into(ffn, hidden);
    Tensor<T> out = layer_norm_forward(ffn, p.ffn_norm, cache ? &c.ffn_norm : nullptr);
    if (cache) {
      c.input = std::move(x);
      c.hidden = std::move(hidden);
      c.ffn_pre = std::move(pre);
      c.ffn_act = std::move(act);
    }
    x = std::move(out);
  }

  std::vector<std::size_t> argmax;
  const auto pooled = masked_max_pool(x, lpa.group_mask, &argmax);
  Tensor<T> pooled_row({1, config.d});
  std::copy(pooled.begin(), pooled.end(), pooled_row.data.begin());
  Tensor<T> logits;
  {
    ops::ScopedCategory cat(OpCategory::kHead);
    logits = linear_forward(pooled_row, params.head);
  }

  if (cache) {
    cache->token_mask.assign(token_mask.begin(), token_mask.end());
    cache->group_mask = lpa.group_mask;
    cache->input_drop = std::move(input_drop);
    cache->layers = std::move(layers);
    cache->pool_argmax = std::move(argmax);
    cache->pooled = std::move(pooled_row);
  }
  return {std::move(logits.data), std::move(lpa.groups), std::move(lpa.group_mask)};
}

template <typename T>
void model_backward(const ForwardCache<T>& cache, std::span<const T> dlogits,
                    const ModelParams<T>& params, const ModelConfig& config, ModelParams<T>& grads) {
  if (dlogits.size() != config.C) throw Error("shape-mismatch", "dlogits length != C");
  const std::size_t d = config.d, groups = config.max_groups();

  Tensor<T> dlog({1, config.C});
  std::copy(dlogits.begin(), dlogits.end(), dlog.data.begin());
  Tensor<T> dpooled;
  linear_backward(cache.pooled, params.head, dlog, grads.head, &dpooled);

  Tensor<T> dx({groups, d});
  masked_max_pool_backward(std::span<const T>(dpooled.data), cache.pool_argmax, dx);

  for (std::size_t l = config.L; l-- > 0;) {
    const auto& p = params.encoder[l];
    auto& g = grads.encoder[l];
    const auto& c = cache.layers[l];

    Tensor<T> dr2;
    layer_norm_backward(c.ffn_norm, p.ffn_norm, dx, g.ffn_norm, dr2);
    Tensor<T> dhidden = dr2;
    dropout_backward(std::span<T>(dr2.data), c.ffn_drop);
    Tensor<T> dact, dh;
    linear_backward(c.ffn_act, p.ffn_out, dr2, g.ffn_out, &dact);
    const Tensor<T> dpre = gelu_backward(c.ffn_pre, dact);
    linear_backward(c.hidden, p.ffn_in, dpre, g.ffn_in, &dh);
    add_into(dhidden, dh);

    Tensor<T> dr1;
    layer_norm_backward(c.attention_norm, p.attention_norm, dhidden, g.attention_norm, dr1);
    dx = dr1;
    dropout_backward(std::span<T>(dr1.data), c.attention_drop);
    Tensor<T> dxa;
    attention_backward(c.attention, p.attention, dr1, g.attention, dxa);
    add_into(dx, dxa);
  }

  dropout_backward(std::span<T>(dx.data), cache.input_drop);
  add_into(grads.pos_embed, dx);

  Tensor<T> dembedded;
  if (!config.has_lpa()) {
    dembedded = std::move(dx);
  } else {
    const std::size_t K = config.K;
    dembedded = Tensor<T>({config.N_max, d});
    for (std::size_t gi = 0; gi < groups; ++gi) {
      const auto& c = cache.groups[gi];
      if (!c.live) continue;
      Tensor<T> dnormed({K, d});
      masked_max_pool_backward(std::span<const T>(dx.row(gi), d), c.argmax, dnormed);
      Tensor<T> dres;
      layer_norm_backward(c.norm, params.lpa_norm, dnormed, grads.lpa_norm, dres);
      Tensor<T> drows = dres;
      dropout_backward(std::span<T>(dres.data), c.attention_drop);
      Tensor<T> da;
      attention_backward(c.attention, params.lpa_attention, dres, grads.lpa_attention, da);
      add_into(drows, da);
      std::copy(drows.data.begin(), drows.data.end(), dembedded.row(gi * K));
    }
  }
  linear_backward(cache.bipolar, params.input, dembedded, grads.input, static_cast<Tensor<T>*>(nullptr));
}

#define LSHFORMER_INSTANTIATE(T)                                                                  \
  template struct ModelParams<T>;                                                                 \
  template Tensor<T> embed_projections(const BitMatrix&, const ModelParams<T>&,                   \
                                       const ModelConfig&, Tensor<T>*);                           \
  template LpaOutput<T> lpa_forward(const Tensor<T>&, std::span<const std::uint8_t>,              \
                                    const ModelParams<T>&, const ModelConfig&,                    \
                                    const DropoutSpec&, std::vector<LpaGroupCache<T>>*);          \
  template ModelOutput<T> model_forward(const BitMatrix&, std::span<const std::uint8_t>,          \
                                        const ModelParams<T>&, const ModelConfig&,                \
                                        const ForwardOptions&, ForwardCache<T>*);                 \
  template void model_backward(const ForwardCache<T>&, std::span<const T>,                        \
                               const ModelParams<T>&, const ModelConfig&, ModelParams<T>&);

LSHFORMER_INSTANTIATE(float)
LSHFORMER_INSTANTIATE(double)

#undef LSHFORMER_INSTANTIATE

template ModelParams<double> cast_params(const ModelParams<float>&, const ModelConfig&);
template ModelParams<float> cast_params(const ModelParams<double>&, const ModelConfig&);
template ModelParams<float> cast_params(const ModelParams<float>&, const ModelConfig&);
template ModelParams<double> cast_params(const ModelParams<double>&, const ModelConfig&);

}  // namespace lshformer
