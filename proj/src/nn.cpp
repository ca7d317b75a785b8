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

#include "lshformer/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lshformer/error.hpp"
#include "lshformer/kernels.hpp"

namespace lshformer {
namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

// ---- linear -----------------------------------------------------------------

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Linear<T>& p) {
  if (x.cols() != p.in()) throw Error("shape-mismatch", "linear input width != weight rows");
  Tensor<T> y({x.rows(), p.out()});
  kernels::gemm(x.data.data(), p.weight.data.data(), y.data.data(), x.rows(), p.in(), p.out(), false);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    T* yi = y.row(i);
    for (std::size_t j = 0; j < p.out(); ++j) yi[j] += p.bias.data[j];
  }
  return y;
}

template <typename T>
void linear_backward(const Tensor<T>& x, const Linear<T>& p, const Tensor<T>& dy, Linear<T>& grad,
                     Tensor<T>* dx) {
  const std::size_t m = x.rows(), k = p.in(), n = p.out();
  kernels::gemm_tn(x.data.data(), dy.data.data(), grad.weight.data.data(), m, k, n);
  for (std::size_t i = 0; i < m; ++i) {
    const T* dyi = dy.row(i);
    for (std::size_t j = 0; j < n; ++j) grad.bias.data[j] += dyi[j];
  }
  if (dx) {
    *dx = Tensor<T>({m, k});
    kernels::gemm_nt(dy.data.data(), p.weight.data.data(), dx->data.data(), m, n, k, false);
  }
}

// ---- layer norm -------------------------------------------------------------

template <typename T>
std::vector<T> layer_norm(std::span<const T> x, std::span<const T> gain, std::span<const T> bias,
                          T epsilon) {
  const std::size_t d = x.size();
  if (d == 0 || gain.size() != d || bias.size() != d)
    throw Error("shape-mismatch", "layer_norm operands must share a positive size");
  T mean{};
  for (auto v : x) mean += v;
  mean /= static_cast<T>(d);
  T var{};
  for (auto v : x) var += (v - mean) * (v - mean);
  var /= static_cast<T>(d);
  const T inv = T(1) / std::sqrt(var + epsilon);
  std::vector<T> y(d);
  for (std::size_t j = 0; j < d; ++j) y[j] = (x[j] - mean) * inv * gain[j] + bias[j];
  return y;
}

template <typename T>
Tensor<T> layer_norm_forward(const Tensor<T>& x, const LayerNorm<T>& p, LayerNormCache<T>* cache) {
  const std::size_t m = x.rows(), d = x.cols();
  if (p.gain.size() != d) throw Error("shape-mismatch", "layer norm width mismatch");
  ops::add(OpCategory::kSecondary, static_cast<std::uint64_t>(m) * d);
  Tensor<T> y({m, d});
  if (cache) {
    cache->normalized = Tensor<T>({m, d});
    cache->inv_std.assign(m, T{});
  }
  const T eps = static_cast<T>(kLayerNormEpsilon);
  for (std::size_t i = 0; i < m; ++i) {
    const T* xi = x.row(i);
    T mean{};
    for (std::size_t j = 0; j < d; ++j) mean += xi[j];
    mean /= static_cast<T>(d);
    T var{};
    for (std::size_t j = 0; j < d; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + eps);
    T* yi = y.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const T n = (xi[j] - mean) * inv;
      if (cache) cache->normalized(i, j) = n;
      yi[j] = n * p.gain.data[j] + p.bias.data[j];
    }
    if (cache) cache->inv_std[i] = inv;
  }
  return y;
}

template <typename T>
void layer_norm_backward(const LayerNormCache<T>& cache, const LayerNorm<T>& p, const Tensor<T>& dy,
                         LayerNorm<T>& grad, Tensor<T>& dx) {
  const std::size_t m = dy.rows(), d = dy.cols();
  dx = Tensor<T>({m, d});
  std::vector<T> dn(d);
  for (std::size_t i = 0; i < m; ++i) {
    const T* dyi = dy.row(i);
    const T* ni = cache.normalized.row(i);
    T sum_dn{}, sum_dn_n{};
    for (std::size_t j = 0; j < d; ++j) {
      grad.gain.data[j] += dyi[j] * ni[j];
      grad.bias.data[j] += dyi[j];
      dn[j] = dyi[j] * p.gain.data[j];
      sum_dn += dn[j];
      sum_dn_n += dn[j] * ni[j];
    }
    const T scale = cache.inv_std[i] / static_cast<T>(d);
    T* dxi = dx.row(i);
    for (std::size_t j = 0; j < d; ++j)
      dxi[j] = scale * (static_cast<T>(d) * dn[j] - sum_dn - ni[j] * sum_dn_n);
  }
}

// ---- GELU ---------------------------------------------------------------------

template <typename T>
T gelu(T x) noexcept {
  const T u = T(kGeluC) * (x + T(kGeluA) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
T gelu_derivative(T x) noexcept {
  const T u = T(kGeluC) * (x + T(kGeluA) * x * x * x);
  const T t = std::tanh(u);
  const T du = T(kGeluC) * (T(1) + T(3 * kGeluA) * x * x);
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
}

template <typename T>
Tensor<T> gelu_forward(const Tensor<T>& x) {
  ops::add(OpCategory::kSecondary, x.size());
  Tensor<T> y = x;
  for (auto& v : y.data) v = gelu(v);
  return y;
}

template <typename T>
Tensor<T> gelu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= gelu_derivative(x.data[i]);
  return dx;
}

// ---- dropout ------------------------------------------------------------------

template <typename T>
void dropout_forward(std::span<T> x, const DropoutSpec& spec, std::vector<T>* scale) {
  if (scale) scale->clear();
  if (!spec.active()) return;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - spec.p));
  if (scale) scale->resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T s = uniform01(*spec.rng) < spec.p ? T{} : keep_scale;
    x[i] *= s;
    if (scale) (*scale)[i] = s;
  }
}

template <typename T>
void dropout_backward(std::span<T> dy, const std::vector<T>& scale) {
  if (scale.empty()) return;
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= scale[i];
}

// ---- masked max-pool ------------------------------------------------------------

template <typename T>
std::vector<T> masked_max_pool(const Tensor<T>& x, std::span<const std::uint8_t> mask,
                               std::vector<std::size_t>* argmax) {
  if (mask.size() != x.rows()) throw Error("shape-mismatch", "pool mask length != rows");
  const std::size_t d = x.cols();
  std::vector<T> out(d);
  std::vector<std::size_t> best(d, 0);
  bool any = false;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (!mask[i]) continue;
    const T* xi = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (!any || xi[j] > out[j]) {
        out[j] = xi[j];
        best[j] = i;
      }
    }
    any = true;
  }
  if (!any) throw Error("empty-pool", "every row is masked");
  if (argmax) *argmax = std::move(best);
  return out;
}

template <typename T>
void masked_max_pool_backward(std::span<const T> dy, const std::vector<std::size_t>& argmax,
                              Tensor<T>& dx) {
  for (std::size_t j = 0; j < dy.size(); ++j) dx(argmax[j], j) += dy[j];
}

// ---- softmax cross-entropy -------------------------------------------------------

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> p(logits.begin(), logits.end());
  const T mx = *std::max_element(p.begin(), p.end());
  T sum{};
  for (auto& v : p) sum += (v = std::exp(v - mx));
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T>
LossAndGrad<T> softmax_cross_entropy(std::span<const T> logits, std::size_t label) {
  if (label >= logits.size())
    throw Error("label-out-of-range",
                std::to_string(label) + " >= " + std::to_string(logits.size()));
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum{};
  for (auto v : logits) sum += std::exp(v - mx);
  const T lse = mx + std::log(sum);
  LossAndGrad<T> out{lse - logits[label], softmax(logits)};
  out.grad[label] -= T(1);
  return out;
}

// ---- attention ------------------------------------------------------------------

template <typename T>
AttentionParams<T> AttentionParams<T>::zeros(std::size_t d, std::size_t heads) {
  return {Linear<T>::zeros(d, d), Linear<T>::zeros(d, d), Linear<T>::zeros(d, d),
          Linear<T>::zeros(d, d), heads};
}

template <typename T>
Tensor<T> attention_forward(const Tensor<T>& x, std::span<const std::uint8_t> mask,
                            const AttentionParams<T>& p, const DropoutSpec& dropout,
                            AttentionCache<T>* cache, AttentionOps ops_cat) {
  const std::size_t m = x.rows(), d = p.dim(), heads = p.heads;
  if (heads == 0 || d % heads != 0)
    throw Error("shape-mismatch", "hidden size must be divisible by head count");
  if (mask.size() != m) throw Error("shape-mismatch", "attention mask length != rows");
  const std::size_t live = static_cast<std::size_t>(std::count_if(
      mask.begin(), mask.end(), [](std::uint8_t b) { return b != 0; }));
  if (live == 0) throw Error("empty-attention-window", "every key is masked");

  const std::size_t hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));

  Tensor<T> q, k, v;
  {
    ops::ScopedCategory cat(ops_cat.projections);
    q = linear_forward(x, p.query);
    k = linear_forward(x, p.key);
    v = linear_forward(x, p.value);
  }

  std::vector<T> probs(heads * m * m, T{});
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hd;
    for (std::size_t i = 0; i < m; ++i) {
      T* row = probs.data() + (h * m + i) * m;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        if (!mask[j]) continue;
        T s{};
        for (std::size_t c = 0; c < hd; ++c) s += q(i, off + c) * k(j, off + c);
        row[j] = s * scale;
        mx = std::max(mx, row[j]);
      }
      T sum{};
      for (std::size_t j = 0; j < m; ++j) {
        if (!mask[j]) continue;
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      }
      for (std::size_t j = 0; j < m; ++j) row[j] = mask[j] ? row[j] / sum : T{};
    }
  }
  ops::add(ops_cat.scores, static_cast<std::uint64_t>(m) * live * d);
  ops::add(OpCategory::kSecondary, static_cast<std::uint64_t>(heads) * m * m);

  std::vector<T> weights = probs;
  std::vector<T> drop_scale;
  dropout_forward(std::span<T>(weights), dropout, &drop_scale);

  Tensor<T> context({m, d});
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hd;
    for (std::size_t i = 0; i < m; ++i) {
      const T* w = weights.data() + (h * m + i) * m;
      T* ci = context.row(i) + off;
      for (std::size_t j = 0; j < m; ++j) {
        if (!mask[j]) continue;
        const T* vj = v.row(j) + off;
        for (std::size_t c = 0; c < hd; ++c) ci[c] += w[j] * vj[c];
      }
    }
  }
  ops::add(ops_cat.scores, static_cast<std::uint64_t>(m) * live * d);

  Tensor<T> out;
  {
    ops::ScopedCategory cat(ops_cat.projections);
    out = linear_forward(context, p.output);
  }
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->context = std::move(context);
    cache->probs = std::move(probs);
    cache->drop_scale = std::move(drop_scale);
  }
  return out;
}

template <typename T>
void attention_backward(const AttentionCache<T>& cache, const AttentionParams<T>& p,
                        const Tensor<T>& dy, AttentionParams<T>& grad, Tensor<T>& dx) {
  const std::size_t m = cache.x.rows(), d = p.dim(), heads = p.heads, hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));

  Tensor<T> dcontext;
  linear_backward(cache.context, p.output, dy, grad.output, &dcontext);

  Tensor<T> dq({m, d}), dk({m, d}), dv({m, d});
  std::vector<T> dw(m), ds(m);
  const bool dropped = !cache.drop_scale.empty();
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hd;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t base = (h * m + i) * m;
      const T* prob = cache.probs.data() + base;
      const T* dc = dcontext.row(i) + off;
      for (std::size_t j = 0; j < m; ++j) {
        const T w = dropped ? prob[j] * cache.drop_scale[base + j] : prob[j];
        T acc{};
        const T* vj = cache.v.row(j) + off;
        T* dvj = dv.row(j) + off;
        for (std::size_t c = 0; c < hd; ++c) {
          acc += dc[c] * vj[c];
          dvj[c] += w * dc[c];
        }
        dw[j] = dropped ? acc * cache.drop_scale[base + j] : acc;
      }
      T dot{};
      for (std::size_t j = 0; j < m; ++j) dot += dw[j] * prob[j];
      for (std::size_t j = 0; j < m; ++j) ds[j] = prob[j] * (dw[j] - dot) * scale;
      T* dqi = dq.row(i) + off;
      const T* qi = cache.q.row(i) + off;
      for (std::size_t j = 0; j < m; ++j) {
        if (ds[j] == T{}) continue;
        const T* kj = cache.k.row(j) + off;
        T* dkj = dk.row(j) + off;
        for (std::size_t c = 0; c < hd; ++c) {
          dqi[c] += ds[j] * kj[c];
          dkj[c] += ds[j] * qi[c];
        }
      }
    }
  }

  Tensor<T> part;
  linear_backward(cache.x, p.query, dq, grad.query, &dx);
  linear_backward(cache.x, p.key, dk, grad.key, &part);
  add_into(dx, part);
  linear_backward(cache.x, p.value, dv, grad.value, &part);
  add_into(dx, part);
}

// ---- Adam -----------------------------------------------------------------------

void adam_update(std::span<const std::span<float>> params,
                 std::span<const std::span<const float>> grads, AdamState& state,
                 const AdamHyper& hyper) {
  if (params.size() != grads.size())
    throw Error("shape-mismatch", "parameter and gradient lists differ in length");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].size() != grads[i].size())
      throw Error("shape-mismatch", "gradient " + std::to_string(i) + " size differs");
  if (state.m.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0f);
      state.v.emplace_back(p.size(), 0.0f);
    }
  }
  if (state.m.size() != params.size())
    throw Error("shape-mismatch", "optimizer state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state.m[i].size() != params[i].size())
      throw Error("shape-mismatch", "optimizer moment " + std::to_string(i) + " size differs");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    auto g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * gj;
      const double vj = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double update = (mj / bc1) / (std::sqrt(vj / bc2) + hyper.epsilon);
      const double pj = p[j];
      p[j] = static_cast<float>(pj - hyper.lr * (update + hyper.weight_decay * pj));
    }
  }
}

#define LSHFORMER_INSTANTIATE(T)                                                                  \
  template Tensor<T> linear_forward(const Tensor<T>&, const Linear<T>&);                          \
  template void linear_backward(const Tensor<T>&, const Linear<T>&, const Tensor<T>&, Linear<T>&, \
                                Tensor<T>*);                                                      \
  template std::vector<T> layer_norm(std::span<const T>, std::span<const T>, std::span<const T>,  \
                                     T);                                                          \
  template Tensor<T> layer_norm_forward(const Tensor<T>&, const LayerNorm<T>&,                    \
                                        LayerNormCache<T>*);                                      \
  template void layer_norm_backward(const LayerNormCache<T>&, const LayerNorm<T>&,                \
                                    const Tensor<T>&, LayerNorm<T>&, Tensor<T>&);                 \
  template T gelu(T) noexcept;                                                                    \
  template T gelu_derivative(T) noexcept;                                                         \
  template Tensor<T> gelu_forward(const Tensor<T>&);                                              \
  template Tensor<T> gelu_backward(const Tensor<T>&, const Tensor<T>&);                           \
  template void dropout_forward(std::span<T>, const DropoutSpec&, std::vector<T>*);               \
  template void dropout_backward(std::span<T>, const std::vector<T>&);                            \
  template std::vector<T> masked_max_pool(const Tensor<T>&, std::span<const std::uint8_t>,        \
                                          std::vector<std::size_t>*);                             \
  template void masked_max_pool_backward(std::span<const T>, const std::vector<std::size_t>&,     \
                                         Tensor<T>&);                                             \
  template std::vector<T> softmax(std::span<const T>);                                            \
  template LossAndGrad<T> softmax_cross_entropy(std::span<const T>, std::size_t);                 \
  template struct AttentionParams<T>;                                                             \
  template Tensor<T> attention_forward(const Tensor<T>&, std::span<const std::uint8_t>,           \
                                       const AttentionParams<T>&, const DropoutSpec&,             \
                                       AttentionCache<T>*, AttentionOps);                         \
  template void attention_backward(const AttentionCache<T>&, const AttentionParams<T>&,           \
                                   const Tensor<T>&, AttentionParams<T>&, Tensor<T>&);

LSHFORMER_INSTANTIATE(float)
LSHFORMER_INSTANTIATE(double)

#undef LSHFORMER_INSTANTIATE

}  // namespace lshformer
