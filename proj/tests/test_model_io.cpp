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

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>
#include <unistd.h>

#include "lshformer/accounting.hpp"
#include "lshformer/error.hpp"
#include "lshformer/model_io.hpp"
#include "lshformer/trainer.hpp"
#include "test_util.hpp"

namespace lshformer {
namespace {

ModelConfig io_config(std::uint32_t K = 2) {
  ModelConfig c;
  c.T = 48;
  c.d = 8;
  c.L = 1;
  c.H = 2;
  c.K = K;
  c.N_max = 4;
  c.C = 3;
  c.ffn_dim = 6;
  return c;
}

std::string load_error(std::span<const std::uint8_t> bytes) {
  try {
    deserialize_model(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class TempDir {
 public:
  TempDir() : path_(std::filesystem::temp_directory_path() / ("lshformer_io_" + std::to_string(::getpid()))) {
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

TEST(ModelFile, LayoutHeader) {
  const auto c = io_config();
  const auto proj = ProjectionConfig::make(c.T, 5, 1, 77);
  const auto bytes = serialize_model(c, proj, init_params(c, 1));
  ASSERT_GE(bytes.size(), 60u);
  EXPECT_EQ(std::memcmp(bytes.data(), "PFMR", 4), 0);
  auto u32_at = [&](std::size_t off) {
    return bytes[off] | (bytes[off + 1] << 8) | (bytes[off + 2] << 16) | (std::uint32_t{bytes[off + 3]} << 24);
  };
  EXPECT_EQ(u32_at(4), kModelFormatVersion);
  EXPECT_EQ(u32_at(8), bytes.size());
  EXPECT_EQ(u32_at(12), 0u);
  EXPECT_EQ(u32_at(20), c.T);
  EXPECT_EQ(u32_at(24), c.d);
  EXPECT_EQ(u32_at(56), proj.T);
  EXPECT_EQ(u32_at(68), 77u);
  EXPECT_EQ(u32_at(76), proj.bit_seeds[0]);
}

TEST(ModelFile, SizeFormula) {
  for (std::uint32_t K : {1u, 2u}) {
    const auto c = io_config(K);
    const auto proj = ProjectionConfig::make(c.T);
    const auto params = init_params(c, 2);
    std::uint64_t tensor_overhead = 0;
    params.visit([&](const std::string&, const Tensor<float>& t) { tensor_overhead += 12 + 4 * t.shape.size(); });
    const std::uint64_t expected = 4 * params.parameter_count() + 4 * c.T + 84 + tensor_overhead;
    EXPECT_EQ(serialize_model(c, proj, params).size(), expected);
    EXPECT_EQ(model_file_size(c, proj), expected);
  }
}

TEST(ModelFile, ReferenceConfigSizeNearFootprint) {
  ModelConfig c;
  c.C = 21;
  const auto report = count_params(c);
  const auto size = model_file_size(c, ProjectionConfig::make(c.T));
  const std::uint64_t floor = 4 * report.total_params + 1680;
  EXPECT_GT(size, floor);
  EXPECT_LT(size - floor, 1024u);
}

TEST(ModelFile, SaveLoadSaveIsByteIdentical) {
  TempDir dir;
  const auto c = io_config();
  const auto proj = ProjectionConfig::make(c.T);
  const auto params = cast_params<float>(testing::random_model(c, 3), c);
  save_model(dir.path() / "a.pfmr", c, proj, params);
  const auto loaded = load_model(dir.path() / "a.pfmr");
  EXPECT_EQ(loaded.config, c);
  EXPECT_EQ(loaded.projection, proj);
  save_model(dir.path() / "b.pfmr", loaded.config, loaded.projection, loaded.params);
  EXPECT_EQ(read_file(dir.path() / "a.pfmr"), read_file(dir.path() / "b.pfmr"));

  std::vector<std::uint32_t> before, after;
  params.visit([&](const std::string&, const Tensor<float>& t) {
    for (float v : t.data) before.push_back(std::bit_cast<std::uint32_t>(v));
  });
  loaded.params.visit([&](const std::string&, const Tensor<float>& t) {
    for (float v : t.data) after.push_back(std::bit_cast<std::uint32_t>(v));
  });
  EXPECT_EQ(before, after);
}

TEST(ModelFile, LoadedModelReproducesLogits) {
  const auto c = io_config(2);
  const auto proj = ProjectionConfig::make(c.T);
  const auto params = cast_params<float>(testing::random_model(c, 4), c);
  const auto loaded = deserialize_model(serialize_model(c, proj, params));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto [bits, mask] = testing::random_input(c, 1 + i % c.N_max, rng);
    const auto a = model_forward(bits, mask, params, c).logits;
    const auto b = model_forward(bits, mask, loaded.params, loaded.config).logits;
    for (std::size_t k = 0; k < c.C; ++k) EXPECT_NEAR(a[k], b[k], 1e-6);
  }
}

TEST(ModelFile, EverySingleByteCorruptionIsDetected) {
  const auto c = io_config();
  const auto bytes = serialize_model(c, ProjectionConfig::make(c.T), init_params(c, 6));
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    for (std::uint8_t flip : {std::uint8_t{0x01}, std::uint8_t{0xff}}) {
      auto damaged = bytes;
      damaged[i] ^= flip;
      const auto code = load_error(damaged);
      if (i < 4) EXPECT_EQ(code, "bad-magic") << "byte " << i;
      else if (i < 8) EXPECT_EQ(code, "version-unsupported") << "byte " << i;
      else EXPECT_EQ(code, "crc-mismatch") << "byte " << i;
    }
  }
}

TEST(ModelFile, EveryTruncationIsReported) {
  const auto c = io_config();
  const auto bytes = serialize_model(c, ProjectionConfig::make(c.T), init_params(c, 7));
  for (std::size_t n = 0; n < bytes.size(); ++n)
    EXPECT_EQ(load_error(std::span(bytes).first(n)), "truncated") << "length " << n;
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_EQ(load_error(longer), "crc-mismatch");
}

TEST(ModelFile, OtherVersionsAreUnsupported) {
  const auto c = io_config();
  auto bytes = serialize_model(c, ProjectionConfig::make(c.T), init_params(c, 8));
  for (std::uint8_t v : {0, 2, 9}) {
    bytes[4] = v;
    EXPECT_EQ(load_error(bytes), "version-unsupported");
  }
}

TEST(ModelFile, IoErrors) {
  TempDir dir;
  try {
    load_model(dir.path() / "missing.pfmr");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "io");
  }
  const auto c = io_config();
  EXPECT_THROW(save_model(dir.path() / "no" / "such" / "dir.pfmr", c, ProjectionConfig::make(c.T), init_params(c, 1)),
               Error);
  EXPECT_THROW(serialize_model(c, ProjectionConfig::make(c.T + 1), init_params(c, 1)), Error);
}

TEST(ModelFile, SizeIndependentOfTrainingVocabulary) {
  auto c = io_config(1);
  c.N_max = 8;
  c.C = 2;
  const auto proj = ProjectionConfig::make(c.T);
  std::vector<LabeledExample> alpha, digits;
  for (int i = 0; i < 20; ++i) {
    alpha.push_back({static_cast<std::uint32_t>(i % 2), {"alpha" + std::string(1, char('a' + i)), "word"}});
    digits.push_back({static_cast<std::uint32_t>(i % 2), {std::to_string(1000 + i), "42", "7"}});
  }
  TrainConfig t;
  t.lr = 1e-3;
  t.warmup_steps = 2;
  t.total_steps = 10;
  t.batch_size = 4;
  const auto a = train(init_params(c, 1), c, proj, alpha, t);
  const auto b = train(init_params(c, 1), c, proj, digits, t);
  const auto sa = serialize_model(c, proj, a.params);
  const auto sb = serialize_model(c, proj, b.params);
  EXPECT_EQ(sa.size(), sb.size());
  EXPECT_NE(sa, sb);
  EXPECT_EQ(sa.size(), model_file_size(c, proj));
}

}  // namespace
}  // namespace lshformer
