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

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "lshformer/error.hpp"
#include "lshformer/grad_check.hpp"
#include "lshformer/nn.hpp"
#include "test_util.hpp"

namespace lshformer {
namespace {

using testing::naive_attention;
using testing::random_attention;
using testing::random_tensor;

constexpr double kPrimitiveTolerance = 1e-4;

template <typename T>
Tensor<T> attend(const Tensor<T>& x, const Mask& mask, const AttentionParams<T>& p, const DropoutSpec& spec = {},
                 AttentionCache<T>* cache = nullptr) {
  return attention_forward<T>(x, mask, p, spec, cache);
}

// Weighted sum of every entry; a generic scalar loss for checking a block's backward pass.
double weighted_sum(const Tensor<double>& y, const Tensor<double>& w) {
  return std::inner_product(y.data.begin(), y.data.end(), w.data.begin(), 0.0);
}

std::vector<ParamRef> linear_refs(Linear<double>& p, const Linear<double>& g) {
  return {{p.weight.data, g.weight.data}, {p.bias.data, g.bias.data}};
}

std::vector<ParamRef> attention_refs(AttentionParams<double>& p, const AttentionParams<double>& g) {
  std::vector<ParamRef> refs;
  for (auto [pl, gl] : {std::pair{&p.query, &g.query}, std::pair{&p.key, &g.key},
                        std::pair{&p.value, &g.value}, std::pair{&p.output, &g.output}}) {
    auto r = linear_refs(*pl, *gl);
    refs.insert(refs.end(), r.begin(), r.end());
  }
  return refs;
}

// ---- linear ---------------------------------------------------------------

TEST(Linear, ForwardIsAffine) {
  auto p = Linear<double>::zeros(2, 3);
  p.weight.data = {1, 2, 3, 4, 5, 6};
  p.bias.data = {0.5, -0.5, 1};
  Tensor<double> x({1, 2});
  x.data = {1, -1};
  const auto y = linear_forward(x, p);
  EXPECT_EQ(y.data, (std::vector<double>{-2.5, -3.5, -2}));
  EXPECT_THROW(linear_forward(Tensor<double>({1, 3}), p), Error);
}

TEST(Linear, CrossEntropyGradCheck) {
  std::mt19937_64 rng(1);
  auto p = Linear<double>::zeros(7, 4);
  testing::fill_normal(p.weight, rng, 0.5);
  testing::fill_normal(p.bias, rng, 0.5);
  auto x = random_tensor<double>({1, 7}, rng);
  const std::size_t label = 2;
  auto loss = [&] {
    const auto y = linear_forward(x, p);
    return softmax_cross_entropy<double>(y.data, label).loss;
  };
  auto grad = Linear<double>::zeros(7, 4);
  Tensor<double> dx({1, 7});
  auto ce = softmax_cross_entropy<double>(linear_forward(x, p).data, label);
  Tensor<double> dy({1, 4});
  dy.data = ce.grad;
  linear_backward(x, p, dy, grad, &dx);

  auto refs = linear_refs(p, grad);
  refs.push_back({x.data, dx.data});
  const auto r = grad_check(loss, refs);
  EXPECT_GE(r.coordinates, 36u);
  EXPECT_LE(r.max_relative_error, kPrimitiveTolerance);
}

// ---- attention ------------------------------------------------------------

TEST(Attention, SingleKeyIsValueThenOutputProjection) {
  std::mt19937_64 rng(2);
  const auto p = random_attention<double>(6, 2, rng);
  const auto x = random_tensor<double>({1, 6}, rng);
  const Mask mask{1};
  const auto y = attend(x, mask, p);
  const auto expected = linear_forward(linear_forward(x, p.value), p.output);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(y.data[j], expected.data[j], 1e-12);
}

TEST(Attention, IdenticalRowsGiveIdenticalOutputs) {
  std::mt19937_64 rng(3);
  const auto p = random_attention<double>(8, 4, rng);
  Tensor<double> x({5, 8});
  const auto row = random_tensor<double>({1, 8}, rng);
  for (std::size_t i = 0; i < 5; ++i) std::copy(row.data.begin(), row.data.end(), x.row(i));
  const auto y = attend(x, Mask(5, 1), p);
  for (std::size_t i = 1; i < 5; ++i)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(y(i, j), y(0, j), 1e-12);
}

TEST(Attention, MatchesNaiveOracle) {
  std::mt19937_64 rng(4);
  const auto p = random_attention<float>(8, 2, rng);
  const auto x = random_tensor<float>({4, 8}, rng);
  for (const Mask& mask : {Mask{1, 1, 1, 1}, Mask{1, 0, 1, 0}}) {
    const auto y = attend(x, mask, p);
    const auto ref = naive_attention(x, mask, p);
    double worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 8; ++j) worst = std::max(worst, std::abs(double(y(i, j)) - ref[i][j]));
    EXPECT_LE(worst, 1e-5);
  }
}

TEST(Attention, ProbabilitiesSumToOneAndIgnoreMaskedKeys) {
  std::mt19937_64 rng(5);
  const auto p = random_attention<float>(8, 2, rng);
  const auto x = random_tensor<float>({6, 8}, rng);
  const Mask mask{1, 1, 0, 1, 0, 1};
  AttentionCache<float> cache;
  attend(x, mask, p, {}, &cache);
  ASSERT_EQ(cache.probs.size(), 2u * 6 * 6);
  for (std::size_t row = 0; row < 2 * 6; ++row) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      const float w = cache.probs[row * 6 + j];
      if (!mask[j]) EXPECT_EQ(w, 0.0f);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-5);
  }
}

TEST(Attention, MaskedContentDoesNotLeak) {
  std::mt19937_64 rng(6);
  const auto p = random_attention<double>(8, 2, rng);
  auto x = random_tensor<double>({5, 8}, rng);
  const Mask mask{1, 0, 1, 1, 0};
  const auto a = attend(x, mask, p);
  for (std::size_t j = 0; j < 8; ++j) {
    x(1, j) = 100.0 * (j + 1);
    x(4, j) = -3.0;
  }
  const auto b = attend(x, mask, p);
  for (std::size_t i : {0u, 2u, 3u})
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(a(i, j), b(i, j), 1e-12);
}

TEST(Attention, RejectsEmptyWindowAndBadHeads) {
  std::mt19937_64 rng(7);
  const auto p = random_attention<double>(8, 2, rng);
  const auto x = random_tensor<double>({3, 8}, rng);
  try {
    attend(x, Mask(3, 0), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "empty-attention-window");
  }
  auto odd = random_attention<double>(8, 3, rng);
  EXPECT_THROW(attend(x, Mask(3, 1), odd), Error);
}

TEST(Attention, InferenceIsBitReproducible) {
  std::mt19937_64 rng(8);
  const auto p = random_attention<float>(16, 4, rng);
  const auto x = random_tensor<float>({7, 16}, rng);
  const Mask mask{1, 1, 1, 0, 1, 1, 0};
  EXPECT_EQ(attend(x, mask, p).data,
            attend(x, mask, p).data);
}

class AttentionGrad : public ::testing::TestWithParam<int> {};

TEST_P(AttentionGrad, MatchesFiniteDifferences) {
  const int seed = GetParam();
  std::mt19937_64 rng(seed);
  const std::size_t m = 3 + seed % 3, d = 8, heads = seed % 2 ? 2 : 4;
  auto p = random_attention<double>(d, heads, rng, 0.5);
  auto x = random_tensor<double>({m, d}, rng);
  const auto w = random_tensor<double>({m, d}, rng);
  Mask mask(m, 1);
  mask[1] = seed % 2;
  const bool with_dropout = seed >= 3;

  auto run = [&](AttentionCache<double>* cache) {
    Rng drop_rng(99);
    DropoutSpec spec{with_dropout ? 0.3 : 0.0, with_dropout ? &drop_rng : nullptr};
    return attend(x, mask, p, spec, cache);
  };
  AttentionCache<double> cache;
  run(&cache);
  auto grad = AttentionParams<double>::zeros(d, heads);
  Tensor<double> dx({m, d});
  attention_backward(cache, p, w, grad, dx);

  // Scores are shift-invariant per query, so the key bias gradient is identically zero and
  // finite differences only measure rounding noise there.
  for (double g : grad.key.bias.data) EXPECT_NEAR(g, 0.0, 1e-12);
  auto refs = attention_refs(p, grad);
  refs.erase(refs.begin() + 3);
  refs.push_back({x.data, dx.data});
  const auto r = grad_check([&] { return weighted_sum(run(nullptr), w); }, refs,
                            {.samples = 80, .seed = std::uint64_t(seed)});
  EXPECT_LE(r.max_relative_error, kPrimitiveTolerance);
}

INSTANTIATE_TEST_SUITE_P(Seeds, AttentionGrad, ::testing::Range(0, 5));

// ---- layer norm -----------------------------------------------------------

TEST(LayerNorm, ConstantInputNormalizesToZero) {
  const std::vector<double> x(6, 3.25), gain(6, 1.0), bias(6, 0.0);
  for (double v : layer_norm<double>(x, gain, bias)) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, ZeroGainReturnsBias) {
  std::mt19937_64 rng(9);
  const auto x = random_tensor<double>({1, 10}, rng);
  const auto b = random_tensor<double>({1, 10}, rng);
  const std::vector<double> gain(10, 0.0);
  EXPECT_EQ(layer_norm<double>(x.data, gain, b.data), b.data);
}

TEST(LayerNorm, OutputMomentsFollowGainAndBias) {
  std::mt19937_64 rng(10);
  const std::size_t d = 4096;
  const auto x = random_tensor<double>({1, d}, rng);
  const std::vector<double> gain(d, 2.5), bias(d, -0.75);
  const auto y = layer_norm<double>(x.data, gain, bias);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / d;
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, -0.75, 1e-9);
  EXPECT_NEAR(std::sqrt(var / d), 2.5, 1e-6);
}

TEST(LayerNorm, GradCheck) {
  std::mt19937_64 rng(11);
  auto p = LayerNorm<double>::identity(9);
  testing::fill_normal(p.gain, rng, 0.3, 1.0);
  testing::fill_normal(p.bias, rng, 0.3);
  auto x = random_tensor<double>({4, 9}, rng);
  const auto w = random_tensor<double>({4, 9}, rng);
  LayerNormCache<double> cache;
  layer_norm_forward(x, p, &cache);
  auto grad = LayerNorm<double>::zeros(9);
  Tensor<double> dx({4, 9});
  layer_norm_backward(cache, p, w, grad, dx);
  const std::vector<ParamRef> refs{{p.gain.data, grad.gain.data}, {p.bias.data, grad.bias.data}, {x.data, dx.data}};
  const auto r = grad_check([&] { return weighted_sum(layer_norm_forward<double>(x, p, nullptr), w); }, refs);
  EXPECT_LE(r.max_relative_error, kPrimitiveTolerance);
}

// ---- gelu -----------------------------------------------------------------

TEST(Gelu, KnownValues) {
  EXPECT_EQ(gelu(0.0), 0.0);
  EXPECT_GE(gelu(10.0), 9.99);
  EXPECT_LE(gelu(10.0), 10.0);
  EXPECT_NEAR(gelu(-10.0), 0.0, 1e-12);
  EXPECT_NEAR(gelu(1.0), 0.8411919906082768, 1e-12);
}

TEST(Gelu, GradCheck) {
  std::mt19937_64 rng(12);
  auto x = random_tensor<double>({3, 20}, rng, 2.0);
  const auto w = random_tensor<double>({3, 20}, rng);
  const auto dx = gelu_backward(x, w);
  const std::vector<ParamRef> refs{{x.data, dx.data}};
  const auto r = grad_check([&] { return weighted_sum(gelu_forward(x), w); }, refs);
  EXPECT_LE(r.max_relative_error, kPrimitiveTolerance);
}

// ---- pooling --------------------------------------------------------------

TEST(MaxPool, HandExample) {
  Tensor<double> x({2, 2});
  x.data = {1, -2, 3, -4};
  EXPECT_EQ(masked_max_pool<double>(x, Mask{1, 1}), (std::vector<double>{3, -2}));
  EXPECT_EQ(masked_max_pool<double>(x, Mask{1, 0}), (std::vector<double>{1, -2}));
  EXPECT_EQ(masked_max_pool<double>(x, Mask{0, 1}), (std::vector<double>{3, -4}));
}

TEST(MaxPool, AllMaskedThrows) {
  Tensor<double> x({2, 2});
  try {
    masked_max_pool<double>(x, Mask{0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "empty-pool");
  }
}

TEST(MaxPool, TiesRouteToLowestRow) {
  Tensor<double> x({3, 1});
  x.data = {2, 5, 5};
  std::vector<std::size_t> argmax;
  masked_max_pool<double>(x, Mask{1, 1, 1}, &argmax);
  EXPECT_EQ(argmax, std::vector<std::size_t>{1});
  Tensor<double> dx({3, 1});
  masked_max_pool_backward<double>(std::vector<double>{1.0}, argmax, dx);
  EXPECT_EQ(dx.data, (std::vector<double>{0, 1, 0}));
}

TEST(MaxPool, GradCheckOffTies) {
  std::mt19937_64 rng(13);
  auto x = random_tensor<double>({6, 10}, rng);
  const Mask mask{1, 0, 1, 1, 0, 1};
  const auto w = random_tensor<double>({1, 10}, rng);
  std::vector<std::size_t> argmax;
  masked_max_pool<double>(x, mask, &argmax);
  for (std::size_t j = 0; j < 10; ++j) EXPECT_TRUE(mask[argmax[j]]);
  Tensor<double> dx({6, 10});
  masked_max_pool_backward<double>(w.data, argmax, dx);
  const std::vector<ParamRef> refs{{x.data, dx.data}};
  const auto r = grad_check(
      [&] {
        const auto y = masked_max_pool<double>(x, mask);
        return std::inner_product(y.begin(), y.end(), w.data.begin(), 0.0);
      },
      refs, {.epsilon = 1e-5});
  EXPECT_LE(r.max_relative_error, kPrimitiveTolerance);
}

// ---- softmax cross entropy ------------------------------------------------

TEST(CrossEntropy, UniformLogits) {
  const auto r = softmax_cross_entropy<double>(std::vector<double>(4, 0.7), 3);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-12);
}

TEST(CrossEntropy, ConfidentPrediction) {
  const auto r = softmax_cross_entropy<double>(std::vector<double>{10, -10}, 0);
  EXPECT_LT(r.loss, 1e-4);
  EXPECT_NEAR(r.loss, 2.0611536e-9, 1e-15);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  const std::vector<double> logits{1.0, -0.5, 3.0, 0.25, 1000.0};
  const auto r = softmax_cross_entropy<double>(logits, 1);
  EXPECT_TRUE(std::isfinite(r.loss));
  const auto probs = softmax<double>(logits);
  EXPECT_NEAR(std::accumulate(probs.begin(), probs.end(), 0.0), 1.0, 1e-12);
  EXPECT_NEAR(std::accumulate(r.grad.begin(), r.grad.end(), 0.0), 0.0, 1e-12);
  for (std::size_t c = 0; c < logits.size(); ++c) EXPECT_NEAR(r.grad[c], probs[c] - (c == 1), 1e-12);
}

TEST(CrossEntropy, LabelOutOfRange) {
  try {
    softmax_cross_entropy<double>(std::vector<double>{0, 0}, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "label-out-of-range");
  }
}

// ---- dropout --------------------------------------------------------------

TEST(Dropout, InactiveIsIdentity) {
  std::vector<float> x{1, 2, 3};
  std::vector<float> scale;
  dropout_forward<float>(x, {}, &scale);
  EXPECT_EQ(x, (std::vector<float>{1, 2, 3}));
  EXPECT_TRUE(scale.empty());
}

TEST(Dropout, InvertedScalingPreservesMean) {
  Rng rng(14);
  std::vector<double> x(100000, 1.0);
  std::vector<double> scale;
  dropout_forward<double>(x, {0.1, &rng}, &scale);
  const auto zeros = std::count(x.begin(), x.end(), 0.0);
  EXPECT_NEAR(double(zeros) / x.size(), 0.1, 0.005);
  EXPECT_NEAR(std::accumulate(x.begin(), x.end(), 0.0) / x.size(), 1.0, 0.01);
  for (double v : x) EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.9) < 1e-12);

  std::vector<double> dy(x.size(), 2.0);
  dropout_backward<double>(dy, scale);
  for (std::size_t i = 0; i < dy.size(); ++i) EXPECT_EQ(dy[i], 2.0 * scale[i]);
}

// ---- adam -----------------------------------------------------------------

TEST(Adam, ZeroGradientNoDecayLeavesParams) {
  std::vector<float> p{1.0f, -2.0f, 0.5f};
  const std::vector<float> g(3, 0.0f);
  const std::vector<std::span<float>> ps{p};
  const std::vector<std::span<const float>> gs{g};
  AdamState state;
  for (int i = 0; i < 5; ++i) adam_update(ps, gs, state, {.lr = 1e-2, .weight_decay = 0.0});
  EXPECT_EQ(p, (std::vector<float>{1.0f, -2.0f, 0.5f}));
  EXPECT_EQ(state.step, 5u);
}

TEST(Adam, FirstStepMatchesClosedForm) {
  std::vector<float> p{1.0f, 1.0f, 1.0f, 1.0f};
  const std::vector<float> g{0.5f, -2.0f, 1e-9f, 0.0f};
  const std::vector<std::span<float>> ps{p};
  const std::vector<std::span<const float>> gs{g};
  AdamState state;
  const AdamHyper hyper{.lr = 1e-3, .weight_decay = 0.0};
  adam_update(ps, gs, state, hyper);
  // After bias correction m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
  for (std::size_t i = 0; i < 4; ++i) {
    const double gi = g[i];
    const double expected = 1.0 - 1e-3 * gi / (std::abs(gi) + 1e-8);
    EXPECT_NEAR(p[i], expected, 1e-7) << i;
  }
}

TEST(Adam, DecayOnlyShrinksGeometrically) {
  std::vector<float> p{2.0f, -4.0f};
  const std::vector<float> g(2, 0.0f);
  const std::vector<std::span<float>> ps{p};
  const std::vector<std::span<const float>> gs{g};
  AdamState state;
  const AdamHyper hyper{.lr = 0.1, .weight_decay = 0.01};
  for (int i = 0; i < 10; ++i) adam_update(ps, gs, state, hyper);
  const double factor = std::pow(1.0 - 0.1 * 0.01, 10);
  EXPECT_NEAR(p[0], 2.0 * factor, 1e-6);
  EXPECT_NEAR(p[1], -4.0 * factor, 1e-6);
}

TEST(Adam, DeterministicAndShapeChecked) {
  std::mt19937_64 rng(15);
  std::normal_distribution<float> dist;
  std::vector<float> a(50), g(50);
  for (auto& v : a) v = dist(rng);
  for (auto& v : g) v = dist(rng);
  auto b = a;
  AdamState sa, sb;
  for (int i = 0; i < 3; ++i) {
    adam_update(std::vector<std::span<float>>{a}, std::vector<std::span<const float>>{g}, sa, {});
    adam_update(std::vector<std::span<float>>{b}, std::vector<std::span<const float>>{g}, sb, {});
  }
  EXPECT_EQ(a, b);
  std::vector<float> short_grad(49);
  EXPECT_THROW(adam_update(std::vector<std::span<float>>{a}, std::vector<std::span<const float>>{short_grad}, sa, {}),
               Error);
}

// ---- grad check harness ---------------------------------------------------

TEST(GradCheck, QuadraticIsExact) {
  std::vector<double> w{3.0};
  std::vector<double> g{6.0};
  const std::vector<ParamRef> refs{{w, g}};
  const auto r = grad_check([&] { return w[0] * w[0]; }, refs);
  EXPECT_EQ(r.coordinates, 1u);
  EXPECT_LE(r.max_relative_error, 1e-6);
  EXPECT_EQ(w[0], 3.0);
}

TEST(GradCheck, DetectsWrongGradient) {
  std::vector<double> w(60, 0.5);
  std::vector<double> g(60, 1.0);
  g[17] = 1.5;
  const std::vector<ParamRef> refs{{w, g}};
  const auto r = grad_check([&] { return std::accumulate(w.begin(), w.end(), 0.0); }, refs, {.samples = 60});
  EXPECT_EQ(r.coordinates, 60u);
  EXPECT_NEAR(r.max_relative_error, 0.5 / 1.5, 1e-6);
}

TEST(GradCheck, SamplesAtLeastFiftyCoordinates) {
  std::vector<double> w(500, 0.1), g(500, 2.0);
  const std::vector<ParamRef> refs{{w, g}};
  const auto r = grad_check([&] { return 2.0 * std::accumulate(w.begin(), w.end(), 0.0); }, refs, {.samples = 10});
  EXPECT_GE(r.coordinates, 50u);
  EXPECT_LE(r.max_relative_error, 1e-6);
}

}  // namespace
}  // namespace lshformer
